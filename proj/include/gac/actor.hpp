#ifndef GAC_ACTOR_HPP
#define GAC_ACTOR_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gac/gauss.hpp"
#include "gac/mlp.hpp"
#include "gac/rng.hpp"

namespace gac {

struct GuideEntry;
struct DualSolution;

// Gaussian actor N(a | mean_net(s), Sigma) with a state-independent SPD
// covariance. The production mean network bounds its output inside the action
// box with a scaled tanh; the unbounded variant exists for update-rule
// oracles that need a raw linear head.
class GaussianPolicy {
 public:
  GaussianPolicy(int state_dim, int action_dim, const std::vector<int>& hidden,
                 const Eigen::VectorXd& action_low, const Eigen::VectorXd& action_high, Rng& rng);

  static GaussianPolicy unbounded(int state_dim, int action_dim, const std::vector<int>& hidden,
                                  Rng& rng);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const Eigen::VectorXd& action_low() const { return low_; }
  const Eigen::VectorXd& action_high() const { return high_; }
  const Eigen::MatrixXd& covariance() const { return sigma_; }
  void set_covariance(const Eigen::MatrixXd& sigma);

  Eigen::VectorXd mean(const Eigen::VectorXd& state) const;
  Eigen::MatrixXd mean_batch(const Eigen::MatrixXd& states) const;
  Gaussian distribution_at(const Eigen::VectorXd& state) const;

  // explore=true draws from N(mean, Sigma) and clips to the action box;
  // explore=false returns the mean exactly and consumes no randomness.
  Eigen::VectorXd act(const Eigen::VectorXd& state, Rng& rng, bool explore) const;

  // One adaptive-moment step on 0.5 * mean_n ||mean(s_n) - target_n||^2 with
  // targets held constant; returns the pre-step loss.
  double fit_mse(const Eigen::MatrixXd& states, const Eigen::MatrixXd& guide_means, double lr);

  // One step on mean_n ||mean(s_n) - mean_plus_n||^2_{F_n} with
  // F_n = (eta + omega) * cov_plus_n^-1; returns the pre-step loss.
  double fit_wmse(const Eigen::MatrixXd& states, const std::vector<GuideEntry>& guides,
                  const DualSolution& duals, double lr);

  // Sigma <- elementwise mean of the guide covariances.
  void update_covariance(const std::vector<GuideEntry>& guides);

  // Gradient helpers without an optimizer step (identity and limit tests).
  Eigen::VectorXd mse_gradient(const Eigen::MatrixXd& states,
                               const Eigen::MatrixXd& guide_means) const;
  Eigen::VectorXd wmse_gradient(const Eigen::MatrixXd& states,
                                const std::vector<GuideEntry>& guides,
                                const DualSolution& duals) const;
  // Jacobian-transpose product grad_theta mean(s) . v for one state.
  Eigen::VectorXd jacobian_vjp(const Eigen::VectorXd& state, const Eigen::VectorXd& v) const;
  // Sum over columns of per-state Jacobian-transpose products.
  Eigen::VectorXd jacobian_vjp_batch(const Eigen::MatrixXd& states,
                                     const Eigen::MatrixXd& v) const;

  Mlp& mean_net() { return net_; }
  const Mlp& mean_net() const { return net_; }

  std::vector<NamedTensor> to_tensors() const;
  static GaussianPolicy from_tensors(const std::vector<NamedTensor>& tensors);
  void save(const std::string& path) const;
  static GaussianPolicy load(const std::string& path);

 private:
  GaussianPolicy() = default;

  int state_dim_ = 0;
  int action_dim_ = 0;
  Mlp net_;
  Eigen::MatrixXd sigma_;
  Eigen::VectorXd low_;
  Eigen::VectorXd high_;
  AdamState adam_;
};

}  // namespace gac

#endif
