#ifndef GAC_GUIDE_HPP
#define GAC_GUIDE_HPP

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "gac/actor.hpp"
#include "gac/critic.hpp"
#include "gac/gauss.hpp"
#include "gac/rng.hpp"

namespace gac {

// Hard floor for both dual variables; realizes the eta -> 0 limiting analyses
// to numerical precision while keeping the damped curvature invertible.
inline constexpr double kDualFloor = 1e-10;

// Per-state quadratic surrogate of the critic anchored at an expansion
// action: Q(s, a) ~= 0.5 a^T curvature a + a^T linear + offset.
struct TaylorModel {
  Eigen::MatrixXd curvature;       // H0, symmetric negative semi-definite
  Eigen::VectorXd linear;          // psi0
  double offset = 0.0;             // xi0
  Eigen::VectorXd expansion_point; // a0 (mean of the draws when averaged)

  double value(const Eigen::VectorXd& action) const {
    return 0.5 * action.dot(curvature * action) + action.dot(linear) + offset;
  }
};

struct GuideEntry {
  Eigen::VectorXd mean;  // phi_plus
  Eigen::MatrixXd cov;   // Sigma_plus, SPD
};

struct DualSolution {
  double eta = kDualFloor;
  double omega = kDualFloor;
  double dual_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

enum class GuideMode { kGac0, kGac1, kGacS };

struct GuideConfig {
  double epsilon = 1e-4;  // KL bound, nats
  double kappa = 0.0;     // entropy bound, nats
  GuideMode mode = GuideMode::kGac0;
  int taylor_samples = 1;  // S, used by kGacS
};

// Optional exact-curvature hook for quadratic oracles; the production path
// always uses the Gauss-Newton surrogate -g g^T.
using CurvatureFn =
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& state, const Eigen::VectorXd& action)>;

TaylorModel taylor_at(const Critic& critic, const Eigen::VectorXd& state,
                      const Eigen::VectorXd& anchor, const CurvatureFn& curvature = {});

// Componentwise average of single-point models built at draws from the policy
// at this state; a single draw reduces to taylor_at.
TaylorModel taylor_averaged(const Critic& critic, const Eigen::VectorXd& state,
                            const Gaussian& policy_at_state, int samples, Rng& rng,
                            const CurvatureFn& curvature = {});

// Closed-form guide: F = eta Sigma^-1 - H0, L = eta Sigma^-1 phi + psi0,
// mean = F^-1 L, cov = (eta + omega) F^-1.
GuideEntry guide_from_dual(const TaylorModel& model, const Gaussian& actor_at_state, double eta,
                           double omega);

// Dual objective over a state batch sharing one (eta, omega) pair. The
// additive constant that does not depend on the dual variables is dropped.
double dual_value(const std::vector<TaylorModel>& models,
                  const std::vector<Eigen::VectorXd>& actor_means,
                  const Eigen::MatrixXd& actor_cov, double eta, double omega, double epsilon,
                  double kappa);

// Analytic gradient: (epsilon - mean KL, mean entropy - kappa) of the induced
// guides, by first-order duality.
Eigen::Vector2d dual_gradient(const std::vector<TaylorModel>& models,
                              const std::vector<Eigen::VectorXd>& actor_means,
                              const Eigen::MatrixXd& actor_cov, double eta, double omega,
                              double epsilon, double kappa);

// Policy-facing overloads evaluating the actor means at the given states.
double dual_value(const Eigen::MatrixXd& states, const std::vector<TaylorModel>& models,
                  const GaussianPolicy& actor, double eta, double omega, double epsilon,
                  double kappa);

// Bounded quasi-Newton descent on (ln eta, ln omega) from the 0.05 start;
// converges when the projected gradient norm drops below 1e-6 or after 200
// iterations.
DualSolution solve_dual(const std::vector<TaylorModel>& models,
                        const std::vector<Eigen::VectorXd>& actor_means,
                        const Eigen::MatrixXd& actor_cov, double epsilon, double kappa);

DualSolution solve_dual(const Eigen::MatrixXd& states, const std::vector<TaylorModel>& models,
                        const GaussianPolicy& actor, double epsilon, double kappa);

struct GuideBatch {
  std::vector<GuideEntry> entries;
  DualSolution dual;
  Eigen::MatrixXd actor_means;  // phi_theta per state, reused by the trainer
  double realized_kl = 0.0;     // batch mean KL(guide || actor)
  double realized_entropy = 0.0;
};

// Algorithm front door: builds Taylor models per state (anchored per mode),
// solves one shared dual over the batch, and emits one guide per state.
GuideBatch compute_guides(const Critic& critic, const GaussianPolicy& actor,
                          const Eigen::MatrixXd& states, const GuideConfig& config, Rng& rng,
                          const CurvatureFn& curvature = {});

}  // namespace gac

#endif
