#ifndef GAC_ENVS_HPP
#define GAC_ENVS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "gac/rng.hpp"

namespace gac {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  int horizon = 0;
  std::string reward_scale;  // human-readable description of the reward range
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool terminal = false;
};

// Deterministic, seedable desk-scale environments. Episodes terminate at the
// horizon only; callers clip actions to the box before stepping.
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

// Selected by name: "lqr1d", "lqr2d", "pendulum", "reacher2d".
std::unique_ptr<Env> make_env(const std::string& name);

// Linear dynamics s' = A s + B a with cost reward -(s^T Qc s + a^T Rc a).
// Initial states are uniform in [-1, 1] per coordinate. Optional additive
// Gaussian state noise (std sigma) exists for robustness experiments only.
class LqrEnv final : public Env {
 public:
  LqrEnv(std::string name, Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd state_cost,
         Eigen::MatrixXd action_cost, Eigen::VectorXd action_low, Eigen::VectorXd action_high,
         int horizon, double noise_std = 0.0);

  static LqrEnv lqr1d();
  static LqrEnv lqr2d();

  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  void set_state(const Eigen::VectorXd& state);
  const Eigen::MatrixXd& dynamics() const { return a_; }
  const Eigen::MatrixXd& input_map() const { return b_; }
  const Eigen::MatrixXd& state_cost() const { return state_cost_; }
  const Eigen::MatrixXd& action_cost() const { return action_cost_; }

 private:
  EnvSpec spec_;
  Eigen::MatrixXd a_, b_, state_cost_, action_cost_;
  double noise_std_;
  Eigen::VectorXd state_;
  Rng rng_{0};
  int t_ = 0;
};

// Torque-limited swing-up with the upright at angle zero:
// angle_acc = (g/l) sin(angle) + u / (m l^2), semi-implicit Euler at dt=0.05,
// velocity clamped to [-8, 8], reward -(wrap(angle)^2 + 0.1 vel^2 + 0.001 u^2).
// Observation is (cos angle, sin angle, vel).
class PendulumEnv final : public Env {
 public:
  PendulumEnv();

  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  void set_state(double angle, double velocity);
  double angle() const { return angle_; }
  double velocity() const { return velocity_; }
  // Mechanical energy with the upright as potential maximum.
  double energy() const;

 private:
  Eigen::VectorXd observation() const;

  EnvSpec spec_;
  double angle_ = 0.0;
  double velocity_ = 0.0;
  Rng rng_{0};
  int t_ = 0;
};

// Double integrator per axis driven toward a per-episode goal:
// vel += dt a, pos += dt vel, reward -||pos - goal||^2 - 0.01 ||a||^2.
// Observation is (pos, vel, goal).
class ReacherEnv final : public Env {
 public:
  ReacherEnv();

  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  void set_state(const Eigen::Vector2d& pos, const Eigen::Vector2d& vel,
                 const Eigen::Vector2d& goal);

 private:
  Eigen::VectorXd observation() const;

  EnvSpec spec_;
  Eigen::Vector2d pos_, vel_, goal_;
  Rng rng_{0};
  int t_ = 0;
};

// Stationary gain of the discounted discrete-time Riccati fixed point,
// iterated to 1e-12; the optimal action is a = -K s.
Eigen::MatrixXd lqr_optimal_gain(const LqrEnv& env, double gamma);

}  // namespace gac

#endif
