#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "gac/errors.hpp"
#include "gac/guide.hpp"
#include "gac/oracle.hpp"
#include "test_util.hpp"

using namespace gac;

namespace {

const Eigen::VectorXd kNoState = Eigen::VectorXd();

CurvatureFn exact_curvature(const QuadraticCritic& critic) {
  return [&critic](const Eigen::VectorXd& s, const Eigen::VectorXd&) {
    return critic.hessian(s);
  };
}

}  // namespace

TEST_CASE("taylor_at") {
  Rng rng(3);
  SUBCASE("a quadratic critic is its own model under exact curvature") {
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd anchor = rng.normal_vector(2);
      const TaylorModel tm = taylor_at(critic, kNoState, anchor, exact_curvature(critic));
      CHECK((tm.curvature - critic.hessian(kNoState)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((tm.linear - critic.linear_term(kNoState)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(tm.offset == doctest::Approx(critic.offset_term(kNoState)).epsilon(1e-10));
    }
  }
  SUBCASE("stationary anchor under Gauss-Newton gives a flat model") {
    const Eigen::MatrixXd w = random_negative_definite(2, rng);
    const Eigen::VectorXd b = rng.normal_vector(2);
    const QuadraticCritic critic = QuadraticCritic::naf(w, b, 0.4);
    const TaylorModel tm = taylor_at(critic, kNoState, b);  // gradient is zero at b
    CHECK(tm.curvature.cwiseAbs().maxCoeff() < 1e-20);
    CHECK(tm.linear.cwiseAbs().maxCoeff() < 1e-20);
    CHECK(tm.offset == doctest::Approx(0.4));
  }
  SUBCASE("model reproduces the critic value at the anchor") {
    const CriticNetwork critic = testutil::random_critic(2, 2, {10, 8}, 19, 0.5);
    const Eigen::VectorXd s = rng.normal_vector(2);
    const Eigen::VectorXd anchor = rng.normal_vector(2);
    const TaylorModel tm = taylor_at(critic, s, anchor);
    CHECK(tm.value(anchor) == doctest::Approx(q_value(critic, s, anchor)).epsilon(1e-12));
  }
}

TEST_CASE("taylor_averaged") {
  Rng rng(5);
  const Gaussian pol = random_gaussian(2, rng, 0.3, 0.6);
  SUBCASE("single sample reduces to taylor_at at that draw") {
    const CriticNetwork critic = testutil::random_critic(1, 2, {8}, 23, 0.5);
    const Eigen::VectorXd s = rng.normal_vector(1);
    Rng draws_a(99), draws_b(99);
    const TaylorModel avg = taylor_averaged(critic, s, pol, 1, draws_a);
    const Eigen::VectorXd anchor =
        gauss_sample_factored(pol.mean, spd_factor_jittered(pol.cov), draws_b);
    const TaylorModel one = taylor_at(critic, s, anchor);
    CHECK((avg.curvature - one.curvature).cwiseAbs().maxCoeff() == 0.0);
    CHECK((avg.linear - one.linear).cwiseAbs().maxCoeff() == 0.0);
    CHECK(avg.offset == one.offset);
  }
  SUBCASE("averaging exact models of a quadratic returns the quadratic") {
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    Rng draws(7);
    for (int samples : {1, 4, 16}) {
      const TaylorModel avg =
          taylor_averaged(critic, kNoState, pol, samples, draws, exact_curvature(critic));
      CHECK((avg.curvature - critic.hessian(kNoState)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((avg.linear - critic.linear_term(kNoState)).cwiseAbs().maxCoeff() < 1e-11);
      CHECK(avg.offset == doctest::Approx(critic.offset_term(kNoState)).epsilon(1e-9));
    }
  }
  SUBCASE("large-sample curvature approaches the analytic expectation") {
    // For a linear-gradient critic g(a) = H a + psi under a ~ N(mu, C):
    // E[-g g^T] = -((H mu + psi)(H mu + psi)^T + H C H^T).
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    const Eigen::MatrixXd h = critic.hessian(kNoState);
    const Eigen::VectorXd gbar = h * pol.mean + critic.linear_term(kNoState);
    const Eigen::MatrixXd expected = -(gbar * gbar.transpose() + h * pol.cov * h.transpose());
    const int samples = 256;
    Rng draws(13);
    const TaylorModel avg = taylor_averaged(critic, kNoState, pol, samples, draws);
    const double tol = 3.0 / std::sqrt(double(samples));
    CHECK((avg.curvature - expected).cwiseAbs().maxCoeff() <
          tol * std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("guide_from_dual closed form") {
  SUBCASE("symmetric instance forces the origin") {
    const TaylorModel tm{-Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), 0.0,
                         Eigen::VectorXd::Zero(2)};
    const Gaussian actor{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
    const GuideEntry guide = guide_from_dual(tm, actor, 1.0, 1.0);
    CHECK(guide.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((guide.cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("large eta collapses the guide onto the actor") {
    Rng rng(9);
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    const Gaussian actor = random_gaussian(2, rng, 0.4, 0.7);
    const TaylorModel tm =
        taylor_at(critic, kNoState, actor.mean, exact_curvature(critic));
    const GuideEntry guide = guide_from_dual(tm, actor, 1e9, 1.0);
    CHECK((guide.mean - actor.mean).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("random 2-d instance matches tilted-density grid moments") {
    Rng rng(15);
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    Gaussian actor = random_gaussian(2, rng, 0.3, 0.4);
    const double eta = 1.2, omega = 0.8;
    const TaylorModel tm =
        taylor_at(critic, kNoState, actor.mean, exact_curvature(critic));
    const GuideEntry guide = guide_from_dual(tm, actor, eta, omega);
    Eigen::VectorXd lo(2), hi(2);
    for (int i = 0; i < 2; ++i) {
      const double span = 9.0 * std::sqrt(actor.cov(i, i)) + 3.0;
      lo[i] = actor.mean[i] - span;
      hi[i] = actor.mean[i] + span;
    }
    const Gaussian moments = guide_grid_search(actor, critic, kNoState, eta, omega,
                                               ActionGrid::regular(lo, hi, 401));
    CHECK((guide.mean - moments.mean).cwiseAbs().maxCoeff() < 1e-4);
    CHECK((guide.cov - moments.cov).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("dual_value and dual_gradient") {
  Rng rng(21);
  const QuadraticCritic critic = random_concave_quadratic(1, rng);
  const Gaussian pol = random_gaussian(1, rng, 0.3, 0.5);
  const TaylorModel tm = taylor_at(critic, kNoState, pol.mean, exact_curvature(critic));
  const std::vector<TaylorModel> models{tm};
  const std::vector<Eigen::VectorXd> means{pol.mean};
  const double eps = 0.02;
  const double kappa = gauss_entropy(pol) - 0.25;

  SUBCASE("differences match Eq-11 quadrature differences") {
    const double amax = -critic.linear_term(kNoState)[0] / critic.hessian(kNoState)(0, 0);
    const double span =
        10.0 * std::sqrt(pol.cov(0, 0)) + 4.0 + std::abs(amax - pol.mean[0]);
    const ActionGrid grid =
        ActionGrid::regular(Eigen::VectorXd::Constant(1, pol.mean[0] - span),
                            Eigen::VectorXd::Constant(1, pol.mean[0] + span), 4097);
    const double v0 = dual_value(models, means, pol.cov, 0.3, 0.4, eps, kappa);
    const double r0 = dual_quadrature(pol, critic, kNoState, 0.3, 0.4, eps, kappa, grid);
    for (double eta : {0.05, 0.4, 1.5}) {
      for (double omega : {0.1, 0.9}) {
        const double v = dual_value(models, means, pol.cov, eta, omega, eps, kappa);
        const double r = dual_quadrature(pol, critic, kNoState, eta, omega, eps, kappa, grid);
        CHECK(std::abs((v - v0) - (r - r0)) < 1e-4);
      }
    }
  }
  SUBCASE("analytic gradient matches finite differences") {
    for (double eta : {0.07, 0.6}) {
      for (double omega : {0.2, 1.1}) {
        const Eigen::Vector2d analytic =
            dual_gradient(models, means, pol.cov, eta, omega, eps, kappa);
        const Eigen::VectorXd numeric = fd_gradient(
            [&](const Eigen::VectorXd& x) {
              return dual_value(models, means, pol.cov, x[0], x[1], eps, kappa);
            },
            (Eigen::VectorXd(2) << eta, omega).finished(), 1e-7);
        const double rel =
            (analytic - Eigen::Vector2d(numeric)).norm() / std::max(1e-12, numeric.norm());
        CHECK(rel < 1e-5);
      }
    }
  }
  SUBCASE("complementary slackness at the solved dual") {
    const DualSolution dual = solve_dual(models, means, pol.cov, eps, kappa);
    const GuideEntry guide = guide_from_dual(tm, pol, dual.eta, dual.omega);
    if (dual.eta > 10 * kDualFloor) {
      const double kl = gauss_kl(Gaussian{guide.mean, guide.cov}, pol);
      CHECK(kl == doctest::Approx(eps).epsilon(1e-4));
    }
  }
}

TEST_CASE("solve_dual") {
  Rng rng(33);
  SUBCASE("feasibility with at least one active constraint") {
    for (int trial = 0; trial < 10; ++trial) {
      const QuadraticCritic critic = random_concave_quadratic(1, rng);
      const Gaussian pol = random_gaussian(1, rng, 0.3, 0.5);
      const double eps = std::pow(10.0, -1.0 - 3.0 * rng.uniform());
      const double kappa = gauss_entropy(pol) - 0.1 - 0.3 * rng.uniform();
      const TaylorModel tm = taylor_at(critic, kNoState, pol.mean, exact_curvature(critic));
      const DualSolution dual =
          solve_dual({tm}, {pol.mean}, pol.cov, eps, kappa);
      CHECK(dual.converged);
      const GuideEntry guide = guide_from_dual(tm, pol, dual.eta, dual.omega);
      const Gaussian gd{guide.mean, guide.cov};
      const double kl = gauss_kl(gd, pol);
      const double entropy = gauss_entropy(gd);
      CHECK(kl <= eps * (1.0 + 1e-3));
      CHECK(entropy >= kappa - 1e-3);
      const bool kl_active = std::abs(kl - eps) <= 1e-3;
      const bool entropy_active = std::abs(entropy - kappa) <= 1e-3;
      CHECK((kl_active || entropy_active));
    }
  }
  SUBCASE("loose bounds pin eta and recover the model maximizer") {
    const QuadraticCritic critic = random_concave_quadratic(2, rng);
    const Gaussian pol = random_gaussian(2, rng, 0.3, 0.5);
    const TaylorModel tm = taylor_at(critic, kNoState, pol.mean, exact_curvature(critic));
    const DualSolution dual = solve_dual({tm}, {pol.mean}, pol.cov, 1e6, -1e6);
    CHECK(dual.eta == doctest::Approx(kDualFloor));
    const GuideEntry guide = guide_from_dual(tm, pol, dual.eta, dual.omega);
    const Eigen::VectorXd maximizer = (-tm.curvature).llt().solve(tm.linear);
    CHECK((guide.mean - maximizer).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("determinism") {
    const QuadraticCritic critic = random_concave_quadratic(1, rng);
    const Gaussian pol = random_gaussian(1, rng, 0.3, 0.5);
    const TaylorModel tm = taylor_at(critic, kNoState, pol.mean, exact_curvature(critic));
    const DualSolution a = solve_dual({tm}, {pol.mean}, pol.cov, 1e-3, gauss_entropy(pol) - 0.2);
    const DualSolution b = solve_dual({tm}, {pol.mean}, pol.cov, 1e-3, gauss_entropy(pol) - 0.2);
    CHECK(a.eta == b.eta);
    CHECK(a.omega == b.omega);
    CHECK(a.dual_value == b.dual_value);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("compute_guides") {
  Rng rng(41);
  SUBCASE("GAC-0 satisfies the second-order update identity") {
    Rng init(43);
    GaussianPolicy actor(2, 2, {8}, Eigen::VectorXd::Constant(2, -2.0),
                         Eigen::VectorXd::Constant(2, 2.0), init);
    const CriticNetwork critic = testutil::random_critic(2, 2, {10}, 47, 0.5);
    Eigen::MatrixXd states(2, 8);
    for (int i = 0; i < 8; ++i) states.col(i) = rng.normal_vector(2);
    Rng loop(49);
    const GuideBatch guides =
        compute_guides(critic, actor, states, GuideConfig{0.01, -5.0, GuideMode::kGac0, 1}, loop);
    const Eigen::MatrixXd precision = spd_inverse(actor.covariance());
    for (int i = 0; i < 8; ++i) {
      const Eigen::VectorXd mean_i = guides.actor_means.col(i);
      const Eigen::VectorXd g = q_grad_action(critic, states.col(i), mean_i);
      const Eigen::MatrixXd damped = guides.dual.eta * precision + g * g.transpose();
      const Eigen::VectorXd expected = mean_i + damped.llt().solve(g);
      CHECK((guides.entries[size_t(i)].mean - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("GAC-1 satisfies the expectation-form update at S = 1") {
    Rng init(53);
    GaussianPolicy actor(1, 1, {6}, Eigen::VectorXd::Constant(1, -2.0),
                         Eigen::VectorXd::Constant(1, 2.0), init);
    const CriticNetwork critic = testutil::random_critic(1, 1, {8}, 59, 0.5);
    Eigen::MatrixXd states(1, 4);
    for (int i = 0; i < 4; ++i) states.col(i) = rng.normal_vector(1);
    Rng loop_a(61), loop_b(61);
    const GuideBatch guides =
        compute_guides(critic, actor, states, GuideConfig{0.01, -5.0, GuideMode::kGac1, 1}, loop_a);
    // Reproduce the anchor draws with an identical stream. The exact S = 1
    // identity rotates the sampled model's gradient evaluated at the policy
    // mean: mean_plus = mean + F^-1 (H0 mean + psi0).
    const Eigen::MatrixXd means = actor.mean_batch(states);
    const Eigen::MatrixXd factor = spd_factor_jittered(actor.covariance());
    const Eigen::MatrixXd precision = spd_inverse(actor.covariance());
    for (int i = 0; i < 4; ++i) {
      const Eigen::VectorXd anchor = gauss_sample_factored(means.col(i), factor, loop_b);
      const TaylorModel tm = taylor_at(critic, states.col(i), anchor);
      const Eigen::MatrixXd damped = guides.dual.eta * precision - tm.curvature;
      const Eigen::VectorXd model_grad = tm.curvature * means.col(i) + tm.linear;
      const Eigen::VectorXd expected = means.col(i) + damped.llt().solve(model_grad);
      CHECK((guides.entries[size_t(i)].mean - expected).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
  SUBCASE("single quadratic state matches the primal lattice at eps = 1e-4") {
    const QuadraticCritic critic = random_concave_quadratic(1, rng);
    Rng init(67);
    GaussianPolicy actor(1, 1, {}, Eigen::VectorXd::Constant(1, -2.0),
                         Eigen::VectorXd::Constant(1, 2.0), init);
    actor.set_covariance(0.25 * Eigen::MatrixXd::Identity(1, 1));
    Eigen::MatrixXd states = Eigen::MatrixXd::Zero(1, 1);
    const double eps = 1e-4;
    const Gaussian pol = actor.distribution_at(states.col(0));
    const double kappa = gauss_entropy(pol) - 0.05;
    Rng loop(71);
    const GuideBatch guides = compute_guides(critic, actor, states,
                                             GuideConfig{eps, kappa, GuideMode::kGac0, 1}, loop,
                                             exact_curvature(critic));
    const ConstrainedGuideResult ref =
        constrained_guide_reference(pol, critic, states.col(0), eps, kappa);
    CHECK((guides.entries[0].mean - ref.guide.mean).cwiseAbs().maxCoeff() < 2e-3);
    CHECK((guides.entries[0].cov - ref.guide.cov).cwiseAbs().maxCoeff() < 2e-3);
  }
}

TEST_CASE("equivalence of closed form and second-order step over random instances") {
  Rng rng(73);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + trial % 3;
    const Eigen::MatrixXd curvature = -random_spd(dim, rng);  // H <= 0
    const Eigen::VectorXd g = rng.normal_vector(dim);
    const Gaussian actor = random_gaussian(dim, rng, 0.5, 0.8);
    const double eta = std::pow(10.0, -2.0 + 3.0 * rng.uniform());
    // Model anchored at the actor mean.
    TaylorModel tm;
    tm.curvature = curvature;
    tm.linear = g - curvature * actor.mean;
    tm.offset = 0.0;
    tm.expansion_point = actor.mean;
    const GuideEntry guide = guide_from_dual(tm, actor, eta, 0.5);
    const Eigen::MatrixXd damped = eta * spd_inverse(actor.cov) - curvature;
    const Eigen::VectorXd second_order = actor.mean + damped.llt().solve(g);
    worst = std::max(worst, (guide.mean - second_order).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("guide covariance is always SPD") {
  Rng rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 3;
    TaylorModel tm;
    const Eigen::VectorXd g = rng.normal_vector(dim);
    tm.curvature = gauss_newton_hessian(g);
    tm.linear = rng.normal_vector(dim);
    tm.offset = 0.0;
    tm.expansion_point = Eigen::VectorXd::Zero(dim);
    const Gaussian actor = random_gaussian(dim, rng, 0.4, 0.6);
    const double eta = std::pow(10.0, -10.0 + 10.0 * rng.uniform());
    const double omega = std::pow(10.0, -4.0 + 5.0 * rng.uniform());
    const GuideEntry guide = guide_from_dual(tm, actor, std::max(eta, kDualFloor), omega);
    CHECK_NOTHROW(spd_factor(guide.cov));
  }
}

TEST_CASE("softmax limit with eta pinned to the floor") {
  Rng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + trial % 2;
    const QuadraticCritic critic = random_concave_quadratic(dim, rng);
    const Gaussian actor = random_gaussian(dim, rng, 0.3, 0.5);
    const TaylorModel tm = taylor_at(critic, kNoState, actor.mean, exact_curvature(critic));
    const double omega = 0.3 + rng.uniform();
    const GuideEntry guide = guide_from_dual(tm, actor, kDualFloor, omega);
    const Eigen::MatrixXd neg_h_inv = spd_inverse(-tm.curvature);
    const Eigen::VectorXd softmax_mean = neg_h_inv * tm.linear;
    const Eigen::MatrixXd softmax_cov = omega * neg_h_inv;
    CHECK((guide.mean - softmax_mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((guide.cov - softmax_cov).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("NAF special case recovers b(s)") {
  Rng rng(89);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 2;
    const Eigen::MatrixXd w = random_negative_definite(dim, rng);
    const Eigen::VectorXd b = rng.normal_vector(dim);
    const QuadraticCritic critic = QuadraticCritic::naf(w, b, rng.normal());
    const Gaussian actor = random_gaussian(dim, rng, 0.5, 1.0);
    const TaylorModel tm = taylor_at(critic, kNoState, actor.mean, exact_curvature(critic));
    const GuideEntry guide = guide_from_dual(tm, actor, kDualFloor, 0.4);
    CHECK((guide.mean - b).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("sampled convexity of the dual in log coordinates near the optimum") {
  Rng rng(97);
  int probes = 0;
  double worst = -1.0;
  while (probes < 20) {
    const QuadraticCritic critic = random_concave_quadratic(1, rng);
    const Gaussian pol = random_gaussian(1, rng, 0.3, 0.5);
    const double eps = 0.01;
    const double kappa = gauss_entropy(pol) - 0.2;
    const TaylorModel tm = taylor_at(critic, kNoState, pol.mean, exact_curvature(critic));
    const std::vector<TaylorModel> models{tm};
    const std::vector<Eigen::VectorXd> means{pol.mean};
    const DualSolution dual = solve_dual(models, means, pol.cov, eps, kappa);
    const Eigen::Vector2d center(std::log(dual.eta), std::log(dual.omega));
    for (int seg = 0; seg < 4 && probes < 20; ++seg, ++probes) {
      Eigen::Vector2d p1 = center + Eigen::Vector2d(rng.normal(), rng.normal());
      Eigen::Vector2d p2 = center + Eigen::Vector2d(rng.normal(), rng.normal());
      auto value_at = [&](const Eigen::Vector2d& u) {
        return dual_value(models, means, pol.cov, std::exp(u[0]), std::exp(u[1]), eps, kappa);
      };
      const Eigen::Vector2d mid = 0.5 * (p1 + p2);
      const double gap = value_at(mid) - 0.5 * (value_at(p1) + value_at(p2));
      worst = std::max(worst, gap);
    }
  }
  CHECK(worst <= 1e-8);
}
