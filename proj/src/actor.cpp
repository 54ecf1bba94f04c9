#include "gac/actor.hpp"

#include <cmath>
#include <limits>

#include "gac/errors.hpp"
#include "gac/guide.hpp"

namespace gac {

GaussianPolicy::GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden,
                               const Eigen::VectorXd& action_low,
                               const Eigen::VectorXd& action_high, Rng& rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      net_(state_dim, hidden, action_dim, Mlp::Output::kTanhBox, rng),
      sigma_(Eigen::MatrixXd::Identity(action_dim, action_dim)),
      low_(action_low),
      high_(action_high) {
  if (action_low.size() != action_dim || action_high.size() != action_dim)
    throw DimensionMismatch("action box does not match action dimension");
  net_.set_output_box(action_low, action_high);
}

GaussianPolicy GaussianPolicy::unbounded(int state_dim, int action_dim,
                                         const std::vector<int>& hidden, Rng& rng) {
  GaussianPolicy p;
  p.state_dim_ = state_dim;
  p.action_dim_ = action_dim;
  p.net_ = Mlp(state_dim, hidden, action_dim, Mlp::Output::kLinear, rng);
  p.sigma_ = Eigen::MatrixXd::Identity(action_dim, action_dim);
  const double inf = std::numeric_limits<double>::infinity();
  p.low_ = Eigen::VectorXd::Constant(action_dim, -inf);
  p.high_ = Eigen::VectorXd::Constant(action_dim, inf);
  return p;
}

void GaussianPolicy::set_covariance(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != action_dim_ || sigma.cols() != action_dim_)
    throw DimensionMismatch("covariance does not match action dimension");
  spd_factor_jittered(sigma);
  sigma_ = sigma;
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& state) const {
  if (state.size() != state_dim_) throw DimensionMismatch("state dimension does not match policy");
  return net_.forward(state);
}

Eigen::MatrixXd GaussianPolicy::mean_batch(const Eigen::MatrixXd& states) const {
  if (states.rows() != state_dim_)
    throw DimensionMismatch("state dimension does not match policy");
  return net_.forward_batch(states);
}

Gaussian GaussianPolicy::distribution_at(const Eigen::VectorXd& state) const {
  return Gaussian{mean(state), sigma_};
}

Eigen::VectorXd GaussianPolicy::act(const Eigen::VectorXd& state, Rng& rng, bool explore) const {
  Eigen::VectorXd a = mean(state);
  if (explore) {
    a = gauss_sample(Gaussian{a, sigma_}, rng);
    a = a.cwiseMax(low_).cwiseMin(high_);
  }
  return a;
}

Eigen::VectorXd GaussianPolicy::mse_gradient(const Eigen::MatrixXd& states,
                                             const Eigen::MatrixXd& guide_means) const {
  if (states.cols() == 0) throw EmptyBatch("mse fit on empty batch");
  if (guide_means.cols() != states.cols() || guide_means.rows() != action_dim_)
    throw DimensionMismatch("guide means do not align with states");
  const double inv_n = 1.0 / static_cast<double>(states.cols());
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = net_.forward_batch(states, cache);
  const Eigen::MatrixXd cot = (mu - guide_means) * inv_n;
  Eigen::VectorXd grad;
  net_.backward_batch(cache, cot, &grad, nullptr);
  return grad;
}

double GaussianPolicy::fit_mse(const Eigen::MatrixXd& states, const Eigen::MatrixXd& guide_means,
                               double lr) {
  if (states.cols() == 0) throw EmptyBatch("mse fit on empty batch");
  if (guide_means.cols() != states.cols() || guide_means.rows() != action_dim_)
    throw DimensionMismatch("guide means do not align with states");
  const double inv_n = 1.0 / static_cast<double>(states.cols());
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = net_.forward_batch(states, cache);
  const Eigen::MatrixXd resid = mu - guide_means;
  const double loss = 0.5 * inv_n * resid.squaredNorm();
  Eigen::VectorXd grad;
  net_.backward_batch(cache, resid * inv_n, &grad, nullptr);
  Eigen::VectorXd params = net_.flat_params();
  adam_.apply(params, grad, lr);
  net_.set_flat_params(params);
  return loss;
}

namespace {

// Shared assembly for the weighted fit: returns pre-step loss, fills the
// cotangent matrix F_n (mean_n - target_n) scaled by 2/n.
double wmse_residuals(const Eigen::MatrixXd& mu, const std::vector<GuideEntry>& guides,
                      const DualSolution& duals, Eigen::MatrixXd& cot) {
  const Eigen::Index n = mu.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double rho = duals.eta + duals.omega;
  double loss = 0.0;
  cot.resize(mu.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd weight = rho * spd_inverse(guides[static_cast<std::size_t>(i)].cov);
    const Eigen::VectorXd resid = mu.col(i) - guides[static_cast<std::size_t>(i)].mean;
    const Eigen::VectorXd weighted = weight * resid;
    loss += inv_n * resid.dot(weighted);
    cot.col(i) = 2.0 * inv_n * weighted;
  }
  return loss;
}

}  // namespace

Eigen::VectorXd GaussianPolicy::wmse_gradient(const Eigen::MatrixXd& states,
                                              const std::vector<GuideEntry>& guides,
                                              const DualSolution& duals) const {
  if (states.cols() == 0) throw EmptyBatch("wmse fit on empty batch");
  if (static_cast<Eigen::Index>(guides.size()) != states.cols())
    throw DimensionMismatch("guides do not align with states");
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = net_.forward_batch(states, cache);
  Eigen::MatrixXd cot;
  wmse_residuals(mu, guides, duals, cot);
  Eigen::VectorXd grad;
  net_.backward_batch(cache, cot, &grad, nullptr);
  return grad;
}

double GaussianPolicy::fit_wmse(const Eigen::MatrixXd& states, const std::vector<GuideEntry>& guides,
                                const DualSolution& duals, double lr) {
  if (states.cols() == 0) throw EmptyBatch("wmse fit on empty batch");
  if (static_cast<Eigen::Index>(guides.size()) != states.cols())
    throw DimensionMismatch("guides do not align with states");
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = net_.forward_batch(states, cache);
  Eigen::MatrixXd cot;
  const double loss = wmse_residuals(mu, guides, duals, cot);
  Eigen::VectorXd grad;
  net_.backward_batch(cache, cot, &grad, nullptr);
  Eigen::VectorXd params = net_.flat_params();
  adam_.apply(params, grad, lr);
  net_.set_flat_params(params);
  return loss;
}

void GaussianPolicy::update_covariance(const std::vector<GuideEntry>& guides) {
  if (guides.empty()) throw EmptyBatch("covariance update on empty batch");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(action_dim_, action_dim_);
  for (const auto& g : guides) sum += g.cov;
  sigma_ = sum / static_cast<double>(guides.size());
}

Eigen::VectorXd GaussianPolicy::jacobian_vjp(const Eigen::VectorXd& state,
                                             const Eigen::VectorXd& v) const {
  return jacobian_vjp_batch(state, v);
}

Eigen::VectorXd GaussianPolicy::jacobian_vjp_batch(const Eigen::MatrixXd& states,
                                                   const Eigen::MatrixXd& v) const {
  Mlp::Cache cache;
  net_.forward_batch(states, cache);
  Eigen::VectorXd grad;
  net_.backward_batch(cache, v, &grad, nullptr);
  return grad;
}

std::vector<NamedTensor> GaussianPolicy::to_tensors() const {
  std::vector<NamedTensor> tensors = net_.to_tensors("mean.");
  tensors.push_back(NamedTensor::from_matrix("sigma", sigma_));
  tensors.push_back(NamedTensor::from_vector("action_low", low_));
  tensors.push_back(NamedTensor::from_vector("action_high", high_));
  return tensors;
}

GaussianPolicy GaussianPolicy::from_tensors(const std::vector<NamedTensor>& tensors) {
  GaussianPolicy p;
  p.net_ = Mlp::from_tensors(tensors, "mean.");
  p.sigma_ = find_tensor(tensors, "sigma").as_matrix();
  p.low_ = find_tensor(tensors, "action_low").as_vector();
  p.high_ = find_tensor(tensors, "action_high").as_vector();
  p.state_dim_ = p.net_.in_dim();
  p.action_dim_ = p.net_.out_dim();
  return p;
}

void GaussianPolicy::save(const std::string& path) const { save_tensors(path, to_tensors()); }

GaussianPolicy GaussianPolicy::load(const std::string& path) {
  return from_tensors(load_tensors(path));
}

}  // namespace gac
