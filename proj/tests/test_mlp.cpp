#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "gac/mlp.hpp"
#include "gac/oracle.hpp"
#include "gac/serialize.hpp"
#include "test_util.hpp"

using namespace gac;

namespace {

// Straightforward per-sample re-implementation of the forward pass, kept
// independent of the batched code path under test.
Eigen::VectorXd duplicate_forward(const Mlp& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd h = x;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::VectorXd z = net.weights()[l] * h + net.biases()[l];
    if (l + 1 < net.layer_count()) {
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
      h = z;
    } else if (net.output_kind() == Mlp::Output::kLinear) {
      h = z;
    } else {
      for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = net.out_center()[i] + net.out_scale()[i] * std::tanh(z[i]);
      h = z;
    }
  }
  return h;
}

Mlp random_mlp(int in, const std::vector<int>& hidden, int out, Mlp::Output kind,
               std::uint64_t seed, double scale) {
  Rng rng(seed);
  Mlp net(in, hidden, out, kind, rng);
  Eigen::VectorXd p = net.flat_params();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = scale * rng.normal();
  net.set_flat_params(p);
  return net;
}

}  // namespace

TEST_CASE("forward matches the duplicate oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto kind = trial % 2 == 0 ? Mlp::Output::kLinear : Mlp::Output::kTanhBox;
    Mlp net = random_mlp(3, {8, 5}, 2, kind, 100 + trial, 0.7);
    if (kind == Mlp::Output::kTanhBox)
      net.set_output_box(Eigen::VectorXd::Constant(2, -1.5), Eigen::VectorXd::Constant(2, 0.5));
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd x = rng.normal_vector(3);
      CHECK((net.forward(x) - duplicate_forward(net, x)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("batch forward agrees with per-sample forward") {
  Mlp net = random_mlp(4, {16}, 3, Mlp::Output::kLinear, 5, 0.5);
  Rng rng(6);
  Eigen::MatrixXd x(4, 32);
  for (int i = 0; i < 32; ++i) x.col(i) = rng.normal_vector(4);
  const Eigen::MatrixXd y = net.forward_batch(x);
  for (int i = 0; i < 32; ++i)
    CHECK((y.col(i) - net.forward(x.col(i))).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("parameter gradients match finite differences") {
  Rng rng(31);
  for (const auto kind : {Mlp::Output::kLinear, Mlp::Output::kTanhBox}) {
    Mlp net = random_mlp(3, {6, 6}, 2, kind, 77, 0.6);
    if (kind == Mlp::Output::kTanhBox)
      net.set_output_box(Eigen::VectorXd::Constant(2, -2.0), Eigen::VectorXd::Constant(2, 2.0));
    Eigen::MatrixXd x(3, 4);
    Eigen::MatrixXd cot(2, 4);
    for (int i = 0; i < 4; ++i) {
      x.col(i) = rng.normal_vector(3);
      cot.col(i) = rng.normal_vector(2);
    }
    Mlp::Cache cache;
    net.forward_batch(x, cache);
    Eigen::VectorXd grad;
    Eigen::MatrixXd input_grad;
    net.backward_batch(cache, cot, &grad, &input_grad);

    auto loss_at = [&](const Eigen::VectorXd& p) {
      Mlp probe = net;
      probe.set_flat_params(p);
      return (probe.forward_batch(x).array() * cot.array()).sum();
    };
    const Eigen::VectorXd numeric = fd_gradient(loss_at, net.flat_params(), 1e-6);
    CHECK((grad - numeric).cwiseAbs().maxCoeff() < 1e-6);

    auto input_loss = [&](const Eigen::VectorXd& x0) {
      Eigen::MatrixXd xs = x;
      xs.col(0) = x0;
      return (net.forward_batch(xs).array() * cot.array()).sum();
    };
    const Eigen::VectorXd numeric_in = fd_gradient(input_loss, x.col(0), 1e-6);
    CHECK((input_grad.col(0) - numeric_in).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("rectifier subgradient at zero is zero") {
  Rng rng(1);
  Mlp net(1, {1}, 1, Mlp::Output::kLinear, rng);
  // One hidden unit sitting exactly on the kink: gradient must use slope 0.
  Eigen::VectorXd p(4);
  p << 1.0, 0.0, 1.0, 0.0;  // W0 = 1, b0 = 0, W1 = 1, b1 = 0
  net.set_flat_params(p);
  Mlp::Cache cache;
  net.forward_batch(Eigen::MatrixXd::Zero(1, 1), cache);
  Eigen::MatrixXd input_grad;
  net.backward_batch(cache, Eigen::MatrixXd::Ones(1, 1), nullptr, &input_grad);
  CHECK(input_grad(0, 0) == 0.0);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  AdamState adam;
  Eigen::VectorXd p = Eigen::VectorXd::Ones(5);
  adam.apply(p, Eigen::VectorXd::Zero(5), 0.01);
  CHECK((p - Eigen::VectorXd::Ones(5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tensor round-trip is bit-exact") {
  Mlp net = random_mlp(5, {7, 3}, 2, Mlp::Output::kTanhBox, 123, 1.3);
  net.set_output_box(Eigen::VectorXd::Constant(2, -0.7), Eigen::VectorXd::Constant(2, 1.9));
  std::stringstream stream;
  write_tensors(stream, net.to_tensors("m."));
  const Mlp back = Mlp::from_tensors(read_tensors(stream), "m.");
  const Eigen::VectorXd a = net.flat_params();
  const Eigen::VectorXd b = back.flat_params();
  REQUIRE(a.size() == b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(net.out_scale()[i] == back.out_scale()[i]);
    CHECK(net.out_center()[i] == back.out_center()[i]);
  }
}

TEST_CASE("tensor values survive extreme exponents bit-exactly") {
  std::vector<NamedTensor> tensors;
  Eigen::VectorXd v(6);
  v << 1.0 / 3.0, -2.5e-308, 1.7976931348623157e308, 0.1 + 0.2, -0.0, 5e-324;
  tensors.push_back(NamedTensor::from_vector("v", v));
  std::stringstream stream;
  write_tensors(stream, tensors);
  const auto back = read_tensors(stream);
  const Eigen::VectorXd w = back.at(0).as_vector();
  for (int i = 0; i < 6; ++i) {
    CHECK(std::memcmp(&v[i], &w[i], sizeof(double)) == 0);
  }
}
