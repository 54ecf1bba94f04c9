#ifndef GAC_CRITIC_HPP
#define GAC_CRITIC_HPP

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "gac/mlp.hpp"
#include "gac/rng.hpp"

namespace gac {

class GaussianPolicy;
struct TransitionBatch;

// Action-value estimator interface: scalar values and exact gradients with
// respect to the action input.
class Critic {
 public:
  virtual ~Critic() = default;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual double value(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const = 0;
  virtual Eigen::VectorXd grad_action(const Eigen::VectorXd& state,
                                      const Eigen::VectorXd& action) const = 0;

  virtual Eigen::VectorXd value_batch(const Eigen::MatrixXd& states,
                                      const Eigen::MatrixXd& actions) const;
  // Gradients per column; values written when non-null.
  virtual Eigen::MatrixXd grad_action_batch(const Eigen::MatrixXd& states,
                                            const Eigen::MatrixXd& actions,
                                            Eigen::VectorXd* values) const;
};

double q_value(const Critic& critic, const Eigen::VectorXd& state, const Eigen::VectorXd& action);
Eigen::VectorXd q_grad_action(const Critic& critic, const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action);

// -g g^T: negative semi-definite curvature surrogate of rank at most one.
Eigen::MatrixXd gauss_newton_hessian(const Eigen::VectorXd& grad);

// Feed-forward critic over the concatenated [state; action] input.
class CriticNetwork final : public Critic {
 public:
  CriticNetwork(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng);

  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return action_dim_; }
  double value(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;
  Eigen::VectorXd grad_action(const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action) const override;
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd& actions) const override;
  Eigen::MatrixXd grad_action_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                                    Eigen::VectorXd* values) const override;

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  std::vector<NamedTensor> to_tensors() const;
  static CriticNetwork from_tensors(const std::vector<NamedTensor>& tensors);
  void save(const std::string& path) const;
  static CriticNetwork load(const std::string& path);

  friend double critic_update(CriticNetwork& net, const CriticNetwork& target,
                              const TransitionBatch& batch, const GaussianPolicy& actor,
                              int target_samples, double gamma, double lr, Rng& rng);

 private:
  CriticNetwork() = default;
  Eigen::MatrixXd stack(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;

  int state_dim_ = 0;
  int action_dim_ = 0;
  Mlp net_;
  AdamState adam_;
};

// Slowly tracking copy of a critic; same shape as its source network.
using TargetCritic = CriticNetwork;

// Bellman targets y_n = r_n + gamma * mean_m Qbar(s'_n, a'_{n,m}); the
// bootstrap term is masked on terminal transitions.
Eigen::VectorXd bellman_targets(const Critic& target, const TransitionBatch& batch,
                                const GaussianPolicy& actor, int target_samples, double gamma,
                                Rng& rng);

// One adaptive-moment step on the squared Bellman error; returns the
// pre-step loss. Targets are constants with respect to the critic parameters.
double critic_update(CriticNetwork& net, const CriticNetwork& target, const TransitionBatch& batch,
                     const GaussianPolicy& actor, int target_samples, double gamma, double lr,
                     Rng& rng);

// target <- tau * net + (1 - tau) * target, elementwise.
void target_sync(const CriticNetwork& net, CriticNetwork& target, double tau);

// Exact quadratic action-value 0.5 a^T H(s) a + a^T psi(s) + xi(s) behind the
// critic interface; state dependence is optional via callbacks.
class QuadraticCritic final : public Critic {
 public:
  using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

  QuadraticCritic(const Eigen::MatrixXd& curvature, const Eigen::VectorXd& linear, double offset,
                  int state_dim = 0);
  QuadraticCritic(MatrixFn curvature, VectorFn linear, ScalarFn offset, int state_dim,
                  int action_dim);

  // 0.5 (a - b(s))^T W(s) (a - b(s)) + V(s) with W negative definite.
  static QuadraticCritic naf(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double v,
                             int state_dim = 0);
  static QuadraticCritic naf(MatrixFn w, VectorFn b, ScalarFn v, int state_dim, int action_dim);

  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return action_dim_; }
  double value(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const override;
  Eigen::VectorXd grad_action(const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action) const override;

  Eigen::MatrixXd hessian(const Eigen::VectorXd& state) const { return curvature_(state); }
  Eigen::VectorXd linear_term(const Eigen::VectorXd& state) const { return linear_(state); }
  double offset_term(const Eigen::VectorXd& state) const { return offset_(state); }

 private:
  MatrixFn curvature_;
  VectorFn linear_;
  ScalarFn offset_;
  int state_dim_ = 0;
  int action_dim_ = 0;
};

}  // namespace gac

#endif
