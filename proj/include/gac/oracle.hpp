#ifndef GAC_ORACLE_HPP
#define GAC_ORACLE_HPP

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "gac/critic.hpp"
#include "gac/gauss.hpp"
#include "gac/rng.hpp"

namespace gac {

// Brute-force references used only by tests and the `verify` CLI. None of
// them reach into module internals; they consume the public value/gradient
// surfaces under test.

// Tensor-product trapezoid grid over an action box.
struct ActionGrid {
  Eigen::VectorXd low;
  Eigen::VectorXd high;
  std::vector<int> resolution;  // nodes per dimension

  static ActionGrid regular(const Eigen::VectorXd& low, const Eigen::VectorXd& high,
                            int points_per_dim);
  ActionGrid refined() const;  // doubled resolution

  int dim() const { return static_cast<int>(low.size()); }
  long size() const;
  Eigen::VectorXd node(long index) const;
  double weight(long index) const;  // trapezoid quadrature weight
};

// Log-integral dual evaluated by quadrature; self-checks against a doubled
// grid and throws GridTooCoarse beyond 1e-5.
double dual_quadrature(const Gaussian& policy_at_state, const Critic& critic,
                       const Eigen::VectorXd& state, double eta, double omega, double epsilon,
                       double kappa, const ActionGrid& grid);

// First two moments of the tilted density policy^(eta/(eta+omega)) *
// exp(Q/(eta+omega)) on the grid.
Gaussian guide_grid_search(const Gaussian& policy_at_state, const Critic& critic,
                           const Eigen::VectorXd& state, double eta, double omega,
                           const ActionGrid& grid);

// Central differences per coordinate.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, double h);
// Central differences of a vector-valued function, one column per coordinate.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h);

struct ConstrainedGuideResult {
  Gaussian guide;
  bool kl_active = false;
  bool entropy_active = false;
  double objective = 0.0;  // E[Q] under the returned Gaussian
};

// Direct primal solve for an exactly quadratic critic with negative-definite
// curvature in one or two action dimensions: dense search over mean and
// covariance-factor lattices, refined around the incumbent.
ConstrainedGuideResult constrained_guide_reference(const Gaussian& policy_at_state,
                                                   const QuadraticCritic& critic,
                                                   const Eigen::VectorXd& state, double epsilon,
                                                   double kappa);

// Shared random-instance helpers for property suites.
Eigen::MatrixXd random_spd(int dim, Rng& rng, double scale = 1.0);
Eigen::MatrixXd random_negative_definite(int dim, Rng& rng, double scale = 1.0);
Gaussian random_gaussian(int dim, Rng& rng, double mean_scale = 1.0, double cov_scale = 1.0);
QuadraticCritic random_concave_quadratic(int action_dim, Rng& rng);

}  // namespace gac

#endif
