#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gac/baselines.hpp"
#include "gac/errors.hpp"
#include "gac/oracle.hpp"
#include "test_util.hpp"

using namespace gac;

TEST_CASE("dpg_direction") {
  SUBCASE("zero critic gives the zero direction") {
    Rng rng(1);
    GaussianPolicy actor(2, 1, {8}, Eigen::VectorXd::Constant(1, -2.0),
                         Eigen::VectorXd::Constant(1, 2.0), rng);
    CriticNetwork critic(2, 1, {8}, rng);
    critic.net().set_flat_params(Eigen::VectorXd::Zero(critic.net().param_count()));
    Eigen::MatrixXd states(2, 4);
    Rng draw(2);
    for (int i = 0; i < 4; ++i) states.col(i) = draw.normal_vector(2);
    CHECK(dpg_direction(actor, critic, states).values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("linear actor with Q = -a^2/2 matches hand calculus") {
    Rng rng(3);
    GaussianPolicy actor = GaussianPolicy::unbounded(1, 1, {}, rng);
    Eigen::VectorXd theta(2);
    theta << 0.8, 0.0;  // phi(s) = 0.8 s
    actor.mean_net().set_flat_params(theta);
    const QuadraticCritic critic(-Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), 0.0,
                                 1);
    Eigen::MatrixXd states(1, 3);
    states << 0.5, -1.0, 2.0;
    const DpgDirection dir = dpg_direction(actor, critic, states);
    // d/dtheta_w mean(-theta s * s) = -theta * E[s^2]; bias grad = -theta E[s].
    const double es2 = (0.25 + 1.0 + 4.0) / 3.0;
    const double es = (0.5 - 1.0 + 2.0) / 3.0;
    CHECK(dir.values[0] == doctest::Approx(-0.8 * es2).epsilon(1e-14));
    CHECK(dir.values[1] == doctest::Approx(-0.8 * es).epsilon(1e-14));
  }
  SUBCASE("matches finite differences of the surrogate objective") {
    Rng rng(5);
    GaussianPolicy actor(2, 2, {6}, Eigen::VectorXd::Constant(2, -2.0),
                         Eigen::VectorXd::Constant(2, 2.0), rng);
    const CriticNetwork critic = testutil::random_critic(2, 2, {10}, 7, 0.4);
    Eigen::MatrixXd states(2, 8);
    Rng draw(9);
    for (int i = 0; i < 8; ++i) states.col(i) = draw.normal_vector(2);
    const DpgDirection dir = dpg_direction(actor, critic, states);
    auto surrogate = [&](const Eigen::VectorXd& p) {
      GaussianPolicy probe = actor;
      probe.mean_net().set_flat_params(p);
      const Eigen::MatrixXd mu = probe.mean_batch(states);
      return critic.value_batch(states, mu).mean();
    };
    const Eigen::VectorXd numeric =
        fd_gradient(surrogate, actor.mean_net().flat_params(), 1e-6);
    CHECK((dir.values - numeric).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("empty batch is an error") {
    Rng rng(11);
    GaussianPolicy actor(1, 1, {}, Eigen::VectorXd::Constant(1, -1.0),
                         Eigen::VectorXd::Constant(1, 1.0), rng);
    CriticNetwork critic(1, 1, {4}, rng);
    CHECK_THROWS_AS(dpg_direction(actor, critic, Eigen::MatrixXd(1, 0)), EmptyBatch);
  }
}

TEST_CASE("dpg_step") {
  Rng rng(13);
  GaussianPolicy actor(2, 1, {6}, Eigen::VectorXd::Constant(1, -2.0),
                       Eigen::VectorXd::Constant(1, 2.0), rng);
  DpgDirection dir;
  dir.values = rng.normal_vector(static_cast<int>(actor.mean_net().param_count()));

  SUBCASE("alpha = 0 leaves parameters unchanged") {
    const Eigen::VectorXd before = actor.mean_net().flat_params();
    dpg_step(actor, dir, 0.0);
    CHECK((actor.mean_net().flat_params() - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two steps compose to one of twice the size") {
    GaussianPolicy twice = actor;
    dpg_step(actor, dir, 0.01);
    dpg_step(actor, dir, 0.01);
    dpg_step(twice, dir, 0.02);
    CHECK((actor.mean_net().flat_params() - twice.mean_net().flat_params())
              .cwiseAbs()
              .maxCoeff() < 1e-15);
  }
  SUBCASE("shape mismatch is an error") {
    DpgDirection bad;
    bad.values = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(dpg_step(actor, bad, 0.1), ShapeMismatch);
  }
  SUBCASE("small ascent steps increase the surrogate") {
    Rng meta(17);
    for (int trial = 0; trial < 10; ++trial) {
      Rng init(mix_seed(19, trial));
      GaussianPolicy a(2, 1, {8}, Eigen::VectorXd::Constant(1, -2.0),
                       Eigen::VectorXd::Constant(1, 2.0), init);
      const CriticNetwork critic =
          testutil::random_critic(2, 1, {8}, mix_seed(23, trial), 0.5);
      Eigen::MatrixXd states(2, 16);
      for (int i = 0; i < 16; ++i) states.col(i) = meta.normal_vector(2);
      auto surrogate = [&]() {
        return critic.value_batch(states, a.mean_batch(states)).mean();
      };
      const DpgDirection dir2 = dpg_direction(a, critic, states);
      if (dir2.values.norm() < 1e-12) continue;
      const double before = surrogate();
      dpg_step(a, dir2, 1e-4 / dir2.values.norm());
      CHECK(surrogate() > before);
    }
  }
}
