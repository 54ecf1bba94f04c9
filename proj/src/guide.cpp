#include "gac/guide.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gac/errors.hpp"

namespace gac {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

TaylorModel assemble_model(const Eigen::MatrixXd& curvature, const Eigen::VectorXd& grad,
                           double q_at_anchor, const Eigen::VectorXd& anchor) {
  TaylorModel model;
  model.curvature = curvature;
  model.linear = grad - curvature * anchor;
  model.offset = 0.5 * anchor.dot(curvature * anchor) - anchor.dot(grad) + q_at_anchor;
  model.expansion_point = anchor;
  return model;
}

// Everything that depends only on the actor, shared across dual iterations.
struct DualContext {
  const std::vector<TaylorModel>* models = nullptr;
  const std::vector<Eigen::VectorXd>* means = nullptr;
  std::vector<Eigen::VectorXd> precision_mean;  // Sigma^-1 phi per state
  std::vector<double> mean_quad;                // phi^T Sigma^-1 phi per state
  Eigen::MatrixXd precision;                    // Sigma^-1
  double logdet_sigma = 0.0;
  int dim = 0;

  DualContext(const std::vector<TaylorModel>& tms, const std::vector<Eigen::VectorXd>& mus,
              const Eigen::MatrixXd& sigma) {
    if (tms.empty()) throw EmptyBatch("dual over an empty batch");
    if (tms.size() != mus.size()) throw DimensionMismatch("models do not align with means");
    models = &tms;
    means = &mus;
    dim = static_cast<int>(sigma.rows());
    const Eigen::MatrixXd chol = spd_factor_jittered(sigma);
    logdet_sigma = spd_log_det(chol);
    precision = spd_inverse(sigma);
    precision_mean.reserve(mus.size());
    mean_quad.reserve(mus.size());
    for (const auto& mu : mus) {
      if (mu.size() != dim) throw DimensionMismatch("mean dimension disagrees with covariance");
      precision_mean.push_back(precision * mu);
      mean_quad.push_back(mu.dot(precision_mean.back()));
    }
  }
};

struct DualPoint {
  bool ok = false;
  double value = std::numeric_limits<double>::infinity();
  double mean_kl = 0.0;
  double mean_entropy = 0.0;
};

// Evaluates the dual objective and, via first-order duality, the realized
// constraint slacks that form its gradient.
DualPoint dual_eval(const DualContext& ctx, double eta, double omega, double epsilon,
                    double kappa) {
  DualPoint out;
  const double rho = eta + omega;
  const int d = ctx.dim;
  const std::size_t n = ctx.models->size();
  double value_sum = 0.0;
  double kl_sum = 0.0;
  double entropy_sum = 0.0;
  if (d == 1) {
    // Scalar path; this is the training hot loop for one-dimensional actions.
    const double precision = ctx.precision(0, 0);
    const double log_rho = std::log(rho);
    for (std::size_t i = 0; i < n; ++i) {
      const TaylorModel& tm = (*ctx.models)[i];
      double f = eta * precision - tm.curvature(0, 0);
      if (!(f > 0.0)) f += kCovarianceJitter;
      if (!(f > 0.0) || !std::isfinite(f)) return out;
      const double log_f = std::log(f);
      const double lin = eta * ctx.precision_mean[i][0] + tm.linear[0];
      const double guide_mean = lin / f;
      value_sum += 0.5 * rho * (kLog2Pi + log_rho - log_f) -
                   0.5 * eta * (kLog2Pi + ctx.logdet_sigma) +
                   0.5 * (lin * guide_mean - eta * ctx.mean_quad[i]);
      const double diff = guide_mean - (*ctx.means)[i][0];
      const double logdet_guide_cov = log_rho - log_f;
      kl_sum += 0.5 * (rho * precision / f + diff * diff * precision - 1.0 +
                       ctx.logdet_sigma - logdet_guide_cov);
      entropy_sum += 0.5 * (1.0 + kLog2Pi + logdet_guide_cov);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.ok = true;
    out.value = eta * epsilon - omega * kappa + value_sum * inv_n;
    out.mean_kl = kl_sum * inv_n;
    out.mean_entropy = entropy_sum * inv_n;
    if (!std::isfinite(out.value)) out.ok = false;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const TaylorModel& tm = (*ctx.models)[i];
    Eigen::MatrixXd damped = eta * ctx.precision - tm.curvature;  // F
    Eigen::LLT<Eigen::MatrixXd> llt(damped);
    if (llt.info() != Eigen::Success) {
      damped.diagonal().array() += kCovarianceJitter;
      llt.compute(damped);
      if (llt.info() != Eigen::Success) return out;  // caller escalates eta
    }
    const Eigen::MatrixXd lower = llt.matrixL();
    double logdet_f = 0.0;
    for (int k = 0; k < d; ++k) {
      const double pivot = lower(k, k);
      if (!(pivot > 0.0) || !std::isfinite(pivot)) return out;
      logdet_f += 2.0 * std::log(pivot);
    }
    const Eigen::VectorXd lin = eta * ctx.precision_mean[i] + tm.linear;  // L
    const Eigen::VectorXd guide_mean = llt.solve(lin);
    const double quad = lin.dot(guide_mean);

    value_sum += 0.5 * rho * (d * std::log(2.0 * M_PI * rho) - logdet_f) -
                 0.5 * eta * (d * kLog2Pi + ctx.logdet_sigma) +
                 0.5 * (quad - eta * ctx.mean_quad[i]);

    // Guide stats at this (eta, omega): Sigma_plus = rho * F^-1.
    const Eigen::MatrixXd f_inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    const double logdet_guide_cov = d * std::log(rho) - logdet_f;
    const double trace_term = rho * (ctx.precision.array() * f_inv.array()).sum();
    const Eigen::VectorXd diff = guide_mean - (*ctx.means)[i];
    const double maha = diff.dot(ctx.precision * diff);
    kl_sum += 0.5 * (trace_term + maha - d + ctx.logdet_sigma - logdet_guide_cov);
    entropy_sum += 0.5 * (d * (1.0 + kLog2Pi) + logdet_guide_cov);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.ok = true;
  out.value = eta * epsilon - omega * kappa + value_sum * inv_n;
  out.mean_kl = kl_sum * inv_n;
  out.mean_entropy = entropy_sum * inv_n;
  if (!std::isfinite(out.value)) out.ok = false;
  return out;
}

std::vector<Eigen::VectorXd> column_means(const Eigen::MatrixXd& m) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) out.push_back(m.col(i));
  return out;
}

}  // namespace

TaylorModel taylor_at(const Critic& critic, const Eigen::VectorXd& state,
                      const Eigen::VectorXd& anchor, const CurvatureFn& curvature) {
  if (anchor.size() != critic.action_dim())
    throw DimensionMismatch("anchor dimension does not match critic");
  const Eigen::VectorXd grad = critic.grad_action(state, anchor);
  const Eigen::MatrixXd h =
      curvature ? curvature(state, anchor) : gauss_newton_hessian(grad);
  return assemble_model(h, grad, critic.value(state, anchor), anchor);
}

TaylorModel taylor_averaged(const Critic& critic, const Eigen::VectorXd& state,
                            const Gaussian& policy_at_state, int samples, Rng& rng,
                            const CurvatureFn& curvature) {
  if (samples < 1) throw ConfigError("taylor sample count must be at least 1");
  const Eigen::MatrixXd factor = spd_factor_jittered(policy_at_state.cov);
  TaylorModel sum;
  for (int i = 0; i < samples; ++i) {
    const Eigen::VectorXd anchor = gauss_sample_factored(policy_at_state.mean, factor, rng);
    TaylorModel one = taylor_at(critic, state, anchor, curvature);
    if (i == 0) {
      sum = std::move(one);
    } else {
      sum.curvature += one.curvature;
      sum.linear += one.linear;
      sum.offset += one.offset;
      sum.expansion_point += one.expansion_point;
    }
  }
  const double inv_s = 1.0 / static_cast<double>(samples);
  sum.curvature *= inv_s;
  sum.linear *= inv_s;
  sum.offset *= inv_s;
  sum.expansion_point *= inv_s;
  return sum;
}

GuideEntry guide_from_dual(const TaylorModel& model, const Gaussian& actor_at_state, double eta,
                           double omega) {
  if (!(eta > 0.0) || !(omega > 0.0)) throw ConfigError("dual variables must be positive");
  if (actor_at_state.cov.rows() == 1) {
    const double variance = actor_at_state.cov(0, 0);
    if (!(variance > 0.0)) throw NotPositiveDefinite("actor variance is not positive");
    double f = eta / variance - model.curvature(0, 0);
    if (!(f > 0.0)) f += kCovarianceJitter;
    if (!(f > 0.0)) throw NotPositiveDefinite("damped curvature lost definiteness");
    GuideEntry entry;
    entry.mean = Eigen::VectorXd::Constant(
        1, (eta * actor_at_state.mean[0] / variance + model.linear[0]) / f);
    entry.cov = Eigen::MatrixXd::Constant(1, 1, (eta + omega) / f);
    return entry;
  }
  const Eigen::MatrixXd precision = spd_inverse(actor_at_state.cov);
  const Eigen::MatrixXd damped = eta * precision - model.curvature;
  const Eigen::MatrixXd lower = spd_factor_jittered(damped);
  const Eigen::VectorXd lin = eta * (precision * actor_at_state.mean) + model.linear;
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(damped.rows(), damped.cols());
  const Eigen::MatrixXd half = lower.triangularView<Eigen::Lower>().solve(identity);
  const Eigen::MatrixXd f_inv = lower.transpose().triangularView<Eigen::Upper>().solve(half);
  GuideEntry entry;
  entry.mean = f_inv * lin;
  entry.cov = (eta + omega) * f_inv;
  entry.cov = 0.5 * (entry.cov + entry.cov.transpose());
  return entry;
}

double dual_value(const std::vector<TaylorModel>& models,
                  const std::vector<Eigen::VectorXd>& actor_means,
                  const Eigen::MatrixXd& actor_cov, double eta, double omega, double epsilon,
                  double kappa) {
  const DualContext ctx(models, actor_means, actor_cov);
  const DualPoint p = dual_eval(ctx, eta, omega, epsilon, kappa);
  if (!p.ok) throw NotPositiveDefinite("damped curvature lost definiteness");
  return p.value;
}

Eigen::Vector2d dual_gradient(const std::vector<TaylorModel>& models,
                              const std::vector<Eigen::VectorXd>& actor_means,
                              const Eigen::MatrixXd& actor_cov, double eta, double omega,
                              double epsilon, double kappa) {
  const DualContext ctx(models, actor_means, actor_cov);
  const DualPoint p = dual_eval(ctx, eta, omega, epsilon, kappa);
  if (!p.ok) throw NotPositiveDefinite("damped curvature lost definiteness");
  return {epsilon - p.mean_kl, p.mean_entropy - kappa};
}

double dual_value(const Eigen::MatrixXd& states, const std::vector<TaylorModel>& models,
                  const GaussianPolicy& actor, double eta, double omega, double epsilon,
                  double kappa) {
  return dual_value(models, column_means(actor.mean_batch(states)), actor.covariance(), eta,
                    omega, epsilon, kappa);
}

DualSolution solve_dual(const std::vector<TaylorModel>& models,
                        const std::vector<Eigen::VectorXd>& actor_means,
                        const Eigen::MatrixXd& actor_cov, double epsilon, double kappa) {
  if (!(epsilon > 0.0)) throw ConfigError("KL bound must be positive");
  const DualContext ctx(models, actor_means, actor_cov);
  const double floor_log = std::log(kDualFloor);
  const int max_iterations = 200;
  const double grad_tolerance = 1e-6;

  Eigen::Vector2d x(std::log(0.05), std::log(0.05));
  DualPoint point = dual_eval(ctx, std::exp(x[0]), std::exp(x[1]), epsilon, kappa);
  // The starting point can be infeasible when exact-curvature models are
  // indefinite; raising eta restores definiteness.
  for (int escalation = 0; !point.ok && escalation < 24; ++escalation) {
    x[0] += std::log(10.0);
    point = dual_eval(ctx, std::exp(x[0]), std::exp(x[1]), epsilon, kappa);
  }
  if (!point.ok)
    throw SolverDiverged("dual objective is not finite after jitter escalation");

  auto log_space_gradient = [&](const Eigen::Vector2d& at, const DualPoint& p) {
    const Eigen::Vector2d g(epsilon - p.mean_kl, p.mean_entropy - kappa);
    return Eigen::Vector2d(g[0] * std::exp(at[0]), g[1] * std::exp(at[1]));
  };
  auto projected = [&](const Eigen::Vector2d& at, Eigen::Vector2d g) {
    for (int k = 0; k < 2; ++k)
      if (at[k] <= floor_log + 1e-12 && g[k] > 0.0) g[k] = 0.0;
    return g;
  };

  Eigen::Vector2d grad = log_space_gradient(x, point);
  Eigen::Matrix2d inv_hessian = Eigen::Matrix2d::Identity();
  DualSolution best;
  best.eta = std::exp(x[0]);
  best.omega = std::exp(x[1]);
  best.dual_value = point.value;

  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const Eigen::Vector2d pg = projected(x, grad);
    if (pg.norm() < grad_tolerance) {
      best.converged = true;
      break;
    }
    Eigen::Vector2d direction = -(inv_hessian * pg);
    if (direction.dot(pg) > -1e-14 * pg.norm()) {
      inv_hessian.setIdentity();
      direction = -pg;
    }
    // Backtracking line search with bound projection.
    double step = 1.0;
    Eigen::Vector2d x_new = x;
    DualPoint p_new;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = (x + step * direction).cwiseMax(floor_log);
      p_new = dual_eval(ctx, std::exp(x_new[0]), std::exp(x_new[1]), epsilon, kappa);
      if (p_new.ok && p_new.value <= point.value + 1e-4 * pg.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      best.converged = pg.norm() < 1e-3;  // stalled at line-search resolution
      break;
    }
    const Eigen::Vector2d grad_new = log_space_gradient(x_new, p_new);
    const Eigen::Vector2d s = x_new - x;
    const Eigen::Vector2d y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12) {
      // BFGS update of the inverse Hessian approximation.
      const Eigen::Matrix2d identity = Eigen::Matrix2d::Identity();
      const Eigen::Matrix2d v = identity - (s * y.transpose()) / sy;
      inv_hessian = v * inv_hessian * v.transpose() + (s * s.transpose()) / sy;
    } else {
      inv_hessian.setIdentity();
    }
    x = x_new;
    point = p_new;
    grad = grad_new;
    if (point.value < best.dual_value) {
      best.dual_value = point.value;
      best.eta = std::exp(x[0]);
      best.omega = std::exp(x[1]);
    }
  }
  best.eta = std::max(std::exp(x[0]), kDualFloor);
  best.omega = std::max(std::exp(x[1]), kDualFloor);
  best.dual_value = point.value;
  best.iterations = iter;
  return best;
}

DualSolution solve_dual(const Eigen::MatrixXd& states, const std::vector<TaylorModel>& models,
                        const GaussianPolicy& actor, double epsilon, double kappa) {
  return solve_dual(models, column_means(actor.mean_batch(states)), actor.covariance(), epsilon,
                    kappa);
}

GuideBatch compute_guides(const Critic& critic, const GaussianPolicy& actor,
                          const Eigen::MatrixXd& states, const GuideConfig& config, Rng& rng,
                          const CurvatureFn& curvature) {
  if (states.cols() == 0) throw EmptyBatch("guide computation on empty batch");
  const Eigen::Index n = states.cols();
  const int adim = actor.action_dim();
  const int samples = config.mode == GuideMode::kGac0   ? 1
                      : config.mode == GuideMode::kGac1 ? 1
                                                        : config.taylor_samples;
  if (samples < 1) throw ConfigError("taylor sample count must be at least 1");

  GuideBatch out;
  out.actor_means = actor.mean_batch(states);

  // Anchor actions per state: the policy mean for GAC-0, policy draws
  // otherwise. Anchors are laid out state-major so draws are reproducible.
  Eigen::MatrixXd anchors(adim, n * samples);
  if (config.mode == GuideMode::kGac0) {
    anchors = out.actor_means;
  } else {
    const Eigen::MatrixXd factor = spd_factor_jittered(actor.covariance());
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < samples; ++j)
        anchors.col(i * samples + j) =
            gauss_sample_factored(out.actor_means.col(i), factor, rng);
  }

  Eigen::MatrixXd rep_states(states.rows(), anchors.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < samples; ++j) rep_states.col(i * samples + j) = states.col(i);

  Eigen::VectorXd values;
  const Eigen::MatrixXd grads = critic.grad_action_batch(rep_states, anchors, &values);

  std::vector<TaylorModel> models;
  models.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    TaylorModel sum;
    for (int j = 0; j < samples; ++j) {
      const Eigen::Index col = i * samples + j;
      const Eigen::VectorXd grad = grads.col(col);
      const Eigen::VectorXd anchor = anchors.col(col);
      const Eigen::MatrixXd h =
          curvature ? curvature(states.col(i), anchor) : gauss_newton_hessian(grad);
      TaylorModel one = assemble_model(h, grad, values[col], anchor);
      if (j == 0) {
        sum = std::move(one);
      } else {
        sum.curvature += one.curvature;
        sum.linear += one.linear;
        sum.offset += one.offset;
        sum.expansion_point += one.expansion_point;
      }
    }
    if (samples > 1) {
      const double inv_s = 1.0 / samples;
      sum.curvature *= inv_s;
      sum.linear *= inv_s;
      sum.offset *= inv_s;
      sum.expansion_point *= inv_s;
    }
    models.push_back(std::move(sum));
  }

  const std::vector<Eigen::VectorXd> means = column_means(out.actor_means);
  out.dual = solve_dual(models, means, actor.covariance(), config.epsilon, config.kappa);

  out.entries.reserve(models.size());
  for (Eigen::Index i = 0; i < n; ++i)
    out.entries.push_back(guide_from_dual(models[static_cast<std::size_t>(i)],
                                          Gaussian{means[static_cast<std::size_t>(i)],
                                                   actor.covariance()},
                                          out.dual.eta, out.dual.omega));

  const DualContext ctx(models, means, actor.covariance());
  const DualPoint at_solution =
      dual_eval(ctx, out.dual.eta, out.dual.omega, config.epsilon, config.kappa);
  out.realized_kl = at_solution.mean_kl;
  out.realized_entropy = at_solution.mean_entropy;
  return out;
}

}  // namespace gac
