#include "gac/envs.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "gac/errors.hpp"
#include "gac/gauss.hpp"

namespace gac {

namespace {

constexpr double kPendulumDt = 0.05;
constexpr double kPendulumGravity = 10.0;
constexpr double kPendulumMass = 1.0;
constexpr double kPendulumLength = 1.0;
constexpr double kPendulumMaxSpeed = 8.0;
constexpr double kReacherDt = 0.1;

double wrap_angle(double theta) {
  theta = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (theta < 0.0) theta += 2.0 * M_PI;
  return theta - M_PI;
}

void check_finite(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw NonFiniteState("environment state overflowed");
}

}  // namespace

LqrEnv::LqrEnv(std::string name, Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd state_cost,
               Eigen::MatrixXd action_cost, Eigen::VectorXd action_low,
               Eigen::VectorXd action_high, int horizon, double noise_std)
    : a_(std::move(a)),
      b_(std::move(b)),
      state_cost_(std::move(state_cost)),
      action_cost_(std::move(action_cost)),
      noise_std_(noise_std) {
  spec_.name = std::move(name);
  spec_.state_dim = static_cast<int>(a_.rows());
  spec_.action_dim = static_cast<int>(b_.cols());
  spec_.action_low = std::move(action_low);
  spec_.action_high = std::move(action_high);
  spec_.horizon = horizon;
  spec_.reward_scale = "-(s'Qc s + a'Rc a), nonpositive, O(1) per step";
  state_ = Eigen::VectorXd::Zero(spec_.state_dim);
}

LqrEnv LqrEnv::lqr1d() {
  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  return LqrEnv("lqr1d", one, one, one, one, Eigen::VectorXd::Constant(1, -2.0),
                Eigen::VectorXd::Constant(1, 2.0), 50);
}

LqrEnv LqrEnv::lqr2d() {
  Eigen::MatrixXd a(2, 2);
  a << 0.95, 0.10, 0.0, 0.95;
  const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
  return LqrEnv("lqr2d", a, b, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2),
                Eigen::VectorXd::Constant(2, -2.0), Eigen::VectorXd::Constant(2, 2.0), 50);
}

Eigen::VectorXd LqrEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  for (int i = 0; i < spec_.state_dim; ++i) state_[i] = rng_.uniform(-1.0, 1.0);
  t_ = 0;
  return state_;
}

StepResult LqrEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != spec_.action_dim) throw DimensionMismatch("action dimension disagrees");
  StepResult out;
  out.reward = -(state_.dot(state_cost_ * state_) + action.dot(action_cost_ * action));
  state_ = a_ * state_ + b_ * action;
  if (noise_std_ > 0.0) state_ += noise_std_ * rng_.normal_vector(spec_.state_dim);
  check_finite(state_);
  ++t_;
  out.next_state = state_;
  out.terminal = t_ >= spec_.horizon;
  return out;
}

void LqrEnv::set_state(const Eigen::VectorXd& state) {
  if (state.size() != spec_.state_dim) throw DimensionMismatch("state dimension disagrees");
  state_ = state;
  t_ = 0;
}

PendulumEnv::PendulumEnv() {
  spec_.name = "pendulum";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = Eigen::VectorXd::Constant(1, -2.0);
  spec_.action_high = Eigen::VectorXd::Constant(1, 2.0);
  spec_.horizon = 200;
  spec_.reward_scale = "-(wrap(angle)^2 + 0.1 vel^2 + 0.001 u^2) in [-16.9, 0] per step";
}

Eigen::VectorXd PendulumEnv::observation() const {
  Eigen::VectorXd obs(3);
  obs << std::cos(angle_), std::sin(angle_), velocity_;
  return obs;
}

Eigen::VectorXd PendulumEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  angle_ = rng_.uniform(-M_PI, M_PI);
  velocity_ = rng_.uniform(-1.0, 1.0);
  t_ = 0;
  return observation();
}

StepResult PendulumEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 1) throw DimensionMismatch("pendulum takes a scalar torque");
  const double u = action[0];
  const double wrapped = wrap_angle(angle_);
  StepResult out;
  out.reward = -(wrapped * wrapped + 0.1 * velocity_ * velocity_ + 0.001 * u * u);
  const double accel = (kPendulumGravity / kPendulumLength) * std::sin(angle_) +
                       u / (kPendulumMass * kPendulumLength * kPendulumLength);
  velocity_ += kPendulumDt * accel;
  velocity_ = std::clamp(velocity_, -kPendulumMaxSpeed, kPendulumMaxSpeed);
  angle_ += kPendulumDt * velocity_;
  if (!std::isfinite(angle_) || !std::isfinite(velocity_))
    throw NonFiniteState("pendulum state overflowed");
  ++t_;
  out.next_state = observation();
  out.terminal = t_ >= spec_.horizon;
  return out;
}

void PendulumEnv::set_state(double angle, double velocity) {
  angle_ = angle;
  velocity_ = velocity;
  t_ = 0;
}

double PendulumEnv::energy() const {
  const double kinetic = 0.5 * kPendulumMass * kPendulumLength * kPendulumLength * velocity_ *
                         velocity_;
  const double potential = kPendulumMass * kPendulumGravity * kPendulumLength * std::cos(angle_);
  return kinetic + potential;
}

ReacherEnv::ReacherEnv() {
  spec_.name = "reacher2d";
  spec_.state_dim = 6;
  spec_.action_dim = 2;
  spec_.action_low = Eigen::VectorXd::Constant(2, -1.0);
  spec_.action_high = Eigen::VectorXd::Constant(2, 1.0);
  spec_.horizon = 200;
  spec_.reward_scale = "-||pos - goal||^2 - 0.01 ||a||^2, nonpositive, O(1) per step";
  pos_.setZero();
  vel_.setZero();
  goal_.setZero();
}

Eigen::VectorXd ReacherEnv::observation() const {
  Eigen::VectorXd obs(6);
  obs << pos_, vel_, goal_;
  return obs;
}

Eigen::VectorXd ReacherEnv::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  for (int i = 0; i < 2; ++i) pos_[i] = rng_.uniform(-1.0, 1.0);
  for (int i = 0; i < 2; ++i) vel_[i] = rng_.uniform(-0.5, 0.5);
  for (int i = 0; i < 2; ++i) goal_[i] = rng_.uniform(-0.5, 0.5);
  t_ = 0;
  return observation();
}

StepResult ReacherEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 2) throw DimensionMismatch("reacher takes a 2-d acceleration");
  StepResult out;
  out.reward = -((pos_ - goal_).squaredNorm() + 0.01 * action.squaredNorm());
  vel_ += kReacherDt * action;
  pos_ += kReacherDt * vel_;
  check_finite(observation());
  ++t_;
  out.next_state = observation();
  out.terminal = t_ >= spec_.horizon;
  return out;
}

void ReacherEnv::set_state(const Eigen::Vector2d& pos, const Eigen::Vector2d& vel,
                           const Eigen::Vector2d& goal) {
  pos_ = pos;
  vel_ = vel;
  goal_ = goal;
  t_ = 0;
}

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "lqr1d") return std::make_unique<LqrEnv>(LqrEnv::lqr1d());
  if (name == "lqr2d") return std::make_unique<LqrEnv>(LqrEnv::lqr2d());
  if (name == "pendulum") return std::make_unique<PendulumEnv>();
  if (name == "reacher2d") return std::make_unique<ReacherEnv>();
  throw ConfigError("unknown environment '" + name + "'");
}

Eigen::MatrixXd lqr_optimal_gain(const LqrEnv& env, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("discount must lie in (0, 1)");
  const Eigen::MatrixXd& a = env.dynamics();
  const Eigen::MatrixXd& b = env.input_map();
  const Eigen::MatrixXd& q = env.state_cost();
  const Eigen::MatrixXd& r = env.action_cost();
  Eigen::MatrixXd p = q;
  const long max_iterations = 100000;
  for (long k = 0; k < max_iterations; ++k) {
    const Eigen::MatrixXd btp = b.transpose() * p;
    const Eigen::MatrixXd gain_denom = r + gamma * btp * b;
    const Eigen::MatrixXd gain = gamma * gain_denom.ldlt().solve(btp * a);
    const Eigen::MatrixXd next =
        q + gamma * a.transpose() * p * a - gamma * a.transpose() * p * b * gain;
    const double delta = (next - p).cwiseAbs().maxCoeff();
    p = 0.5 * (next + next.transpose());
    if (delta < 1e-12) {
      const Eigen::MatrixXd btp_final = b.transpose() * p;
      return gamma * (r + gamma * btp_final * b).ldlt().solve(btp_final * a);
    }
  }
  throw NoConvergence("riccati iteration did not reach 1e-12");
}

}  // namespace gac
