#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gac/errors.hpp"
#include "gac/replay.hpp"

using namespace gac;

namespace {

Transition make_transition(double tag) {
  Transition t;
  t.state = Eigen::VectorXd::Constant(2, tag);
  t.action = Eigen::VectorXd::Constant(1, -tag);
  t.reward = 10.0 * tag;
  t.next_state = Eigen::VectorXd::Constant(2, tag + 0.5);
  t.terminal = static_cast<long>(tag) % 2 == 0;
  return t;
}

}  // namespace

TEST_CASE("push") {
  SUBCASE("ring overwrites the oldest entries") {
    ReplayBuffer buf(2);
    buf.push(make_transition(1));
    buf.push(make_transition(2));
    buf.push(make_transition(3));
    CHECK(buf.size() == 2);
    CHECK(buf.at(0).reward == 30.0);  // slot 0 overwritten by item 3
    CHECK(buf.at(1).reward == 20.0);
  }
  SUBCASE("size saturates at capacity") {
    ReplayBuffer buf(5);
    for (int k = 1; k <= 12; ++k) {
      buf.push(make_transition(k));
      CHECK(buf.size() == std::min<std::size_t>(k, 5));
    }
  }
  SUBCASE("pushed transitions read back unchanged") {
    ReplayBuffer buf(4);
    const Transition t = make_transition(7);
    buf.push(t);
    CHECK((buf.at(0).state - t.state).cwiseAbs().maxCoeff() == 0.0);
    CHECK((buf.at(0).action - t.action).cwiseAbs().maxCoeff() == 0.0);
    CHECK(buf.at(0).reward == t.reward);
    CHECK((buf.at(0).next_state - t.next_state).cwiseAbs().maxCoeff() == 0.0);
    CHECK(buf.at(0).terminal == t.terminal);
  }
  SUBCASE("dimension changes are rejected") {
    ReplayBuffer buf(4);
    buf.push(make_transition(1));
    Transition bad = make_transition(2);
    bad.action = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(buf.push(bad), DimensionMismatch);
  }
}

TEST_CASE("sample") {
  SUBCASE("empty buffer is an error") {
    ReplayBuffer buf(4);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample(1, rng), EmptyBuffer);
  }
  SUBCASE("a singleton buffer yields copies of its element") {
    ReplayBuffer buf(4);
    buf.push(make_transition(3));
    Rng rng(2);
    const TransitionBatch batch = buf.sample(6, rng);
    CHECK(batch.size() == 6);
    for (int i = 0; i < 6; ++i) {
      CHECK(batch.rewards[i] == 30.0);
      CHECK(batch.states(0, i) == 3.0);
    }
  }
  SUBCASE("uniformity over a 10-element buffer") {
    ReplayBuffer buf(10);
    for (int k = 0; k < 10; ++k) {
      Transition t = make_transition(k);
      t.reward = k;
      buf.push(t);
    }
    Rng rng(3);
    std::vector<long> counts(10, 0);
    const int total = 1000000;
    const int chunk = 1000;
    for (int rep = 0; rep < total / chunk; ++rep) {
      const TransitionBatch batch = buf.sample(chunk, rng);
      for (int i = 0; i < chunk; ++i) ++counts[static_cast<std::size_t>(batch.rewards[i])];
    }
    for (int k = 0; k < 10; ++k) {
      const double freq = static_cast<double>(counts[static_cast<std::size_t>(k)]) / total;
      CHECK(freq == doctest::Approx(0.1).epsilon(0.01));
    }
  }
  SUBCASE("sampling is deterministic per seed") {
    ReplayBuffer buf(16);
    for (int k = 0; k < 16; ++k) buf.push(make_transition(k));
    Rng a(9), b(9);
    const TransitionBatch x = buf.sample(32, a);
    const TransitionBatch y = buf.sample(32, b);
    CHECK((x.rewards - y.rewards).cwiseAbs().maxCoeff() == 0.0);
  }
}
