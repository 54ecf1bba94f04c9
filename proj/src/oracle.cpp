#include "gac/oracle.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gac/errors.hpp"

namespace gac {

namespace {

double log_sum_exp(const std::vector<double>& terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace

ActionGrid ActionGrid::regular(const Eigen::VectorXd& low, const Eigen::VectorXd& high,
                               int points_per_dim) {
  if (low.size() != high.size()) throw DimensionMismatch("grid bounds disagree");
  if (points_per_dim < 2) throw ConfigError("grid needs at least two points per dimension");
  ActionGrid g;
  g.low = low;
  g.high = high;
  g.resolution.assign(static_cast<std::size_t>(low.size()), points_per_dim);
  return g;
}

ActionGrid ActionGrid::refined() const {
  ActionGrid g = *this;
  for (int& r : g.resolution) r = 2 * r - 1;  // keeps existing nodes
  return g;
}

long ActionGrid::size() const {
  long n = 1;
  for (int r : resolution) n *= r;
  return n;
}

Eigen::VectorXd ActionGrid::node(long index) const {
  Eigen::VectorXd a(dim());
  for (int d = 0; d < dim(); ++d) {
    const int r = resolution[static_cast<std::size_t>(d)];
    const long i = index % r;
    index /= r;
    a[d] = low[d] + (high[d] - low[d]) * static_cast<double>(i) / (r - 1);
  }
  return a;
}

double ActionGrid::weight(long index) const {
  double w = 1.0;
  for (int d = 0; d < dim(); ++d) {
    const int r = resolution[static_cast<std::size_t>(d)];
    const long i = index % r;
    index /= r;
    const double spacing = (high[d] - low[d]) / (r - 1);
    w *= (i == 0 || i == r - 1) ? 0.5 * spacing : spacing;
  }
  return w;
}

namespace {

double dual_quadrature_once(const Gaussian& policy, const Critic& critic,
                            const Eigen::VectorXd& state, double eta, double omega, double epsilon,
                            double kappa, const ActionGrid& grid) {
  const double rho = eta + omega;
  const double mix = eta / rho;
  const long n = grid.size();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd a = grid.node(i);
    const double log_pi = gauss_log_density(policy, a);
    terms.push_back(mix * log_pi + critic.value(state, a) / rho + std::log(grid.weight(i)));
  }
  return eta * epsilon - omega * kappa + rho * log_sum_exp(terms);
}

}  // namespace

double dual_quadrature(const Gaussian& policy_at_state, const Critic& critic,
                       const Eigen::VectorXd& state, double eta, double omega, double epsilon,
                       double kappa, const ActionGrid& grid) {
  const double coarse =
      dual_quadrature_once(policy_at_state, critic, state, eta, omega, epsilon, kappa, grid);
  const double fine = dual_quadrature_once(policy_at_state, critic, state, eta, omega, epsilon,
                                           kappa, grid.refined());
  if (std::abs(fine - coarse) > 1e-5)
    throw GridTooCoarse("dual quadrature changed by more than 1e-5 under refinement");
  return fine;
}

namespace {

Gaussian grid_moments(const Gaussian& policy, const Critic& critic, const Eigen::VectorXd& state,
                      double eta, double omega, const ActionGrid& grid) {
  const double rho = eta + omega;
  const double mix = eta / rho;
  const long n = grid.size();
  std::vector<double> logw(static_cast<std::size_t>(n));
  double m = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd a = grid.node(i);
    logw[static_cast<std::size_t>(i)] =
        mix * gauss_log_density(policy, a) + critic.value(state, a) / rho +
        std::log(grid.weight(i));
    m = std::max(m, logw[static_cast<std::size_t>(i)]);
  }
  double total = 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(grid.dim());
  for (long i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<std::size_t>(i)] - m);
    total += w;
    mean += w * grid.node(i);
  }
  mean /= total;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(grid.dim(), grid.dim());
  for (long i = 0; i < n; ++i) {
    const double w = std::exp(logw[static_cast<std::size_t>(i)] - m);
    const Eigen::VectorXd d = grid.node(i) - mean;
    cov += w * (d * d.transpose());
  }
  cov /= total;
  return Gaussian{mean, cov};
}

}  // namespace

Gaussian guide_grid_search(const Gaussian& policy_at_state, const Critic& critic,
                           const Eigen::VectorXd& state, double eta, double omega,
                           const ActionGrid& grid) {
  const Gaussian coarse = grid_moments(policy_at_state, critic, state, eta, omega, grid);
  const Gaussian fine = grid_moments(policy_at_state, critic, state, eta, omega, grid.refined());
  const double drift = std::max((fine.mean - coarse.mean).cwiseAbs().maxCoeff(),
                                (fine.cov - coarse.cov).cwiseAbs().maxCoeff());
  if (drift > 1e-5)
    throw GridTooCoarse("grid moments changed by more than 1e-5 under refinement");
  return fine;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double hi = f(p);
    p[i] = x[i] - h;
    const double lo = f(p);
    p[i] = x[i];
    g[i] = (hi - lo) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = x[i] + h;
    const double hi = f(p);
    p[i] = x[i] - h;
    const double lo = f(p);
    p[i] = x[i];
    hess(i, i) = (hi - 2.0 * f0 + lo) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      p[i] = x[i] + h;
      p[j] = x[j] + h;
      const double pp = f(p);
      p[j] = x[j] - h;
      const double pm = f(p);
      p[i] = x[i] - h;
      const double mm = f(p);
      p[j] = x[j] + h;
      const double mp = f(p);
      p[i] = x[i];
      p[j] = x[j];
      hess(i, j) = hess(j, i) = (pp - pm - mp + mm) / (4.0 * h * h);
    }
  }
  return hess;
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  Eigen::VectorXd p = x;
  p[0] = x[0] + h;
  Eigen::VectorXd probe = f(p);
  p[0] = x[0];
  Eigen::MatrixXd jac(probe.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const Eigen::VectorXd hi = f(p);
    p[i] = x[i] - h;
    const Eigen::VectorXd lo = f(p);
    p[i] = x[i];
    jac.col(i) = (hi - lo) / (2.0 * h);
  }
  return jac;
}

namespace {

struct LatticeCandidate {
  Eigen::VectorXd mean;
  Eigen::MatrixXd factor;  // lower-triangular covariance factor
};

// Objective E[Q] for an exact quadratic: 0.5 mu'H mu + mu'psi + xi + 0.5 tr(H C).
double quadratic_expectation(const Eigen::MatrixXd& h, const Eigen::VectorXd& psi, double xi,
                             const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  return 0.5 * mu.dot(h * mu) + mu.dot(psi) + xi + 0.5 * (h * cov).trace();
}

}  // namespace

ConstrainedGuideResult constrained_guide_reference(const Gaussian& policy_at_state,
                                                   const QuadraticCritic& critic,
                                                   const Eigen::VectorXd& state, double epsilon,
                                                   double kappa) {
  const int d = policy_at_state.dim();
  if (d != 1 && d != 2)
    throw ConfigError("primal reference supports one- or two-dimensional actions");
  const Eigen::MatrixXd h = critic.hessian(state);
  const Eigen::VectorXd psi = critic.linear_term(state);
  const double xi = critic.offset_term(state);
  spd_factor(-h);  // requires strictly concave critics

  const Eigen::MatrixXd pol_factor = spd_factor(policy_at_state.cov);
  const Eigen::MatrixXd precision = spd_inverse(policy_at_state.cov);
  const double pol_logdet = spd_log_det(pol_factor);
  const double kl_radius = std::sqrt(2.0 * epsilon);
  const double pol_entropy = gauss_entropy(policy_at_state);

  // Parameter lattice: mean entries plus the covariance factor entries.
  // KL <= eps bounds every candidate inside a ball of Sigma-metric radius
  // sqrt(2 eps) around the policy, which the windows below over-cover.
  const int mean_params = d;
  const int factor_params = d * (d + 1) / 2;
  const int total_params = mean_params + factor_params;

  Eigen::VectorXd center(total_params);
  Eigen::VectorXd window(total_params);
  for (int i = 0; i < d; ++i) {
    center[i] = policy_at_state.mean[i];
    window[i] = 1.6 * kl_radius * std::sqrt(policy_at_state.cov(i, i));
  }
  // Entropy above the policy's requires inflating the factor diagonal.
  const double inflate = std::max(0.0, (kappa - pol_entropy) / d);
  int k = mean_params;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      center[k] = pol_factor(i, j);
      const double scale = std::sqrt(pol_factor(i, i) * pol_factor(j, j));
      window[k] = (1.6 * kl_radius + (std::exp(inflate) - 1.0)) * std::max(scale, 1e-8);
      ++k;
    }
  }

  auto unpack = [&](const Eigen::VectorXd& params) {
    LatticeCandidate c;
    c.mean = params.head(d);
    c.factor = Eigen::MatrixXd::Zero(d, d);
    int idx = mean_params;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) c.factor(i, j) = params[idx++];
    return c;
  };

  auto evaluate = [&](const LatticeCandidate& c, double& kl, double& entropy, double& objective) {
    for (int i = 0; i < d; ++i)
      if (!(c.factor(i, i) > 1e-10)) return false;
    const Eigen::MatrixXd cov = c.factor * c.factor.transpose();
    const double logdet = 2.0 * c.factor.diagonal().array().log().sum();
    const Eigen::VectorXd diff = c.mean - policy_at_state.mean;
    kl = 0.5 * ((precision.array() * cov.array()).sum() + diff.dot(precision * diff) - d +
                pol_logdet - logdet);
    entropy = 0.5 * (d * (1.0 + 1.8378770664093454836) + logdet);
    objective = quadratic_expectation(h, psi, xi, c.mean, cov);
    return true;
  };

  // The optimum usually sits on a curved constraint boundary; the axis-aligned
  // lattice tracks it tangentially only to O(sqrt(spacing)), so shrink the
  // window gently across passes.
  const int points = d == 1 ? 41 : 13;
  const int passes = d == 1 ? 6 : 5;
  const double shrink = 0.35;
  Eigen::VectorXd best_params = center;
  double best_objective = -std::numeric_limits<double>::infinity();
  double best_kl = 0.0, best_entropy = 0.0;
  bool any_feasible = false;

  Eigen::VectorXd current_center = center;
  Eigen::VectorXd current_window = window;
  for (int pass = 0; pass < passes; ++pass) {
    long count = 1;
    for (int i = 0; i < total_params; ++i) count *= points;
    for (long idx = 0; idx < count; ++idx) {
      long rem = idx;
      Eigen::VectorXd params(total_params);
      for (int i = 0; i < total_params; ++i) {
        const int digit = static_cast<int>(rem % points);
        rem /= points;
        params[i] = current_center[i] +
                    current_window[i] * (2.0 * digit / (points - 1) - 1.0);
      }
      const LatticeCandidate c = unpack(params);
      double kl, entropy, objective;
      if (!evaluate(c, kl, entropy, objective)) continue;
      if (kl > epsilon || entropy < kappa) continue;
      if (objective > best_objective) {
        best_objective = objective;
        best_params = params;
        best_kl = kl;
        best_entropy = entropy;
        any_feasible = true;
      }
    }
    if (!any_feasible)
      throw InfeasibleBounds("no lattice point satisfies both constraints");
    current_center = best_params;
    current_window *= shrink;
  }

  // Adaptive random polish: the axis-aligned lattice tracks a curved
  // constraint boundary only to O(sqrt(spacing)). Random steps are projected
  // onto the tangent space of whichever constraints are active at the
  // incumbent (numerical gradients), so the walk slides along the boundary
  // instead of bouncing off it. Seeded, hence deterministic.
  {
    Rng ray_rng(0x9e3779b9);
    double scale = 0.05;
    const Eigen::VectorXd shape = window;
    auto constraint_gradients = [&](const Eigen::VectorXd& at, Eigen::VectorXd& kl_grad,
                                    Eigen::VectorXd& entropy_grad) {
      kl_grad.resize(total_params);
      entropy_grad.resize(total_params);
      for (int i = 0; i < total_params; ++i) {
        const double h = 1e-7 * std::max(shape[i], 1e-6);
        Eigen::VectorXd p = at;
        double klp, hp, op, klm, hm, om;
        p[i] = at[i] + h;
        if (!evaluate(unpack(p), klp, hp, op)) klp = hp = 0.0;
        p[i] = at[i] - h;
        if (!evaluate(unpack(p), klm, hm, om)) klm = hm = 0.0;
        kl_grad[i] = (klp - klm) / (2.0 * h);
        entropy_grad[i] = (hp - hm) / (2.0 * h);
      }
    };
    Eigen::VectorXd kl_grad, entropy_grad;
    constraint_gradients(best_params, kl_grad, entropy_grad);
    for (int it = 0; it < 30000 && scale > 1e-10; ++it) {
      Eigen::VectorXd dir(total_params);
      for (int i = 0; i < total_params; ++i) dir[i] = scale * shape[i] * ray_rng.normal();
      if (epsilon - best_kl < 0.25 * epsilon && kl_grad.norm() > 0.0)
        dir -= (dir.dot(kl_grad) / kl_grad.squaredNorm()) * kl_grad;
      if (best_entropy - kappa < 0.05 && entropy_grad.norm() > 0.0)
        dir -= (dir.dot(entropy_grad) / entropy_grad.squaredNorm()) * entropy_grad;
      Eigen::VectorXd params = best_params + dir;
      double kl = 0.0, entropy = 0.0, objective = 0.0;
      bool ok = evaluate(unpack(params), kl, entropy, objective);
      // Curvature pushes tangential steps off the boundary; restore
      // feasibility with joint first-order corrections on the violated
      // constraints before judging the step.
      for (int restore = 0; ok && restore < 3 && (kl > epsilon || entropy < kappa); ++restore) {
        const double v_kl = std::max(kl - epsilon, 0.0);
        const double v_h = std::max(kappa - entropy, 0.0);
        Eigen::Matrix2d gram;
        gram << kl_grad.squaredNorm(), kl_grad.dot(entropy_grad), kl_grad.dot(entropy_grad),
            entropy_grad.squaredNorm();
        const Eigen::Vector2d wanted(-1.05 * v_kl, 1.05 * v_h);
        if (gram.determinant() > 1e-18 * gram.trace() * gram.trace()) {
          const Eigen::Vector2d lambda = gram.inverse() * wanted;
          params += lambda[0] * kl_grad + lambda[1] * entropy_grad;
        } else {
          if (v_kl > 0.0 && kl_grad.squaredNorm() > 0.0)
            params -= (1.05 * v_kl / kl_grad.squaredNorm()) * kl_grad;
          if (v_h > 0.0 && entropy_grad.squaredNorm() > 0.0)
            params += (1.05 * v_h / entropy_grad.squaredNorm()) * entropy_grad;
        }
        ok = evaluate(unpack(params), kl, entropy, objective);
      }
      ok = ok && kl <= epsilon && entropy >= kappa && objective > best_objective;
      if (ok) {
        best_objective = objective;
        best_params = params;
        best_kl = kl;
        best_entropy = entropy;
        scale *= 1.3;
        constraint_gradients(best_params, kl_grad, entropy_grad);
      } else {
        scale *= std::pow(0.5, 0.2);
      }
    }
  }

  const LatticeCandidate best = unpack(best_params);
  ConstrainedGuideResult out;
  out.guide = Gaussian{best.mean, best.factor * best.factor.transpose()};
  out.objective = best_objective;
  out.kl_active = (epsilon - best_kl) <= 1e-3;
  out.entropy_active = (best_entropy - kappa) <= 1e-3;
  return out;
}

Eigen::MatrixXd random_spd(int dim, Rng& rng, double scale) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd m = scale * (0.3 * Eigen::MatrixXd::Identity(dim, dim) +
                               (a * a.transpose()) / static_cast<double>(dim));
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd random_negative_definite(int dim, Rng& rng, double scale) {
  return -random_spd(dim, rng, scale);
}

Gaussian random_gaussian(int dim, Rng& rng, double mean_scale, double cov_scale) {
  Gaussian g;
  g.mean = mean_scale * rng.normal_vector(dim);
  g.cov = random_spd(dim, rng, cov_scale);
  return g;
}

QuadraticCritic random_concave_quadratic(int action_dim, Rng& rng) {
  const Eigen::MatrixXd h = random_negative_definite(action_dim, rng);
  const Eigen::VectorXd psi = rng.normal_vector(action_dim);
  const double xi = rng.normal();
  return QuadraticCritic(h, psi, xi);
}

}  // namespace gac
