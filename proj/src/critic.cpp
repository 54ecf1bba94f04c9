#include "gac/critic.hpp"

#include "gac/actor.hpp"
#include "gac/errors.hpp"
#include "gac/gauss.hpp"
#include "gac/replay.hpp"

namespace gac {

Eigen::VectorXd Critic::value_batch(const Eigen::MatrixXd& states,
                                    const Eigen::MatrixXd& actions) const {
  if (states.cols() != actions.cols()) throw DimensionMismatch("batch sizes disagree");
  Eigen::VectorXd out(states.cols());
  for (Eigen::Index i = 0; i < states.cols(); ++i) out[i] = value(states.col(i), actions.col(i));
  return out;
}

Eigen::MatrixXd Critic::grad_action_batch(const Eigen::MatrixXd& states,
                                          const Eigen::MatrixXd& actions,
                                          Eigen::VectorXd* values) const {
  if (states.cols() != actions.cols()) throw DimensionMismatch("batch sizes disagree");
  Eigen::MatrixXd grads(action_dim(), states.cols());
  if (values) values->resize(states.cols());
  for (Eigen::Index i = 0; i < states.cols(); ++i) {
    grads.col(i) = grad_action(states.col(i), actions.col(i));
    if (values) (*values)[i] = value(states.col(i), actions.col(i));
  }
  return grads;
}

double q_value(const Critic& critic, const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  return critic.value(state, action);
}

Eigen::VectorXd q_grad_action(const Critic& critic, const Eigen::VectorXd& state,
                              const Eigen::VectorXd& action) {
  return critic.grad_action(state, action);
}

Eigen::MatrixXd gauss_newton_hessian(const Eigen::VectorXd& grad) {
  return -(grad * grad.transpose());
}

CriticNetwork::CriticNetwork(int state_dim, int action_dim, const std::vector<int>& hidden,
                             Rng& rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      net_(state_dim + action_dim, hidden, 1, Mlp::Output::kLinear, rng) {}

Eigen::MatrixXd CriticNetwork::stack(const Eigen::MatrixXd& states,
                                     const Eigen::MatrixXd& actions) const {
  if (states.rows() != state_dim_ || actions.rows() != action_dim_)
    throw DimensionMismatch("state/action dimensions do not match critic");
  if (states.cols() != actions.cols()) throw DimensionMismatch("batch sizes disagree");
  Eigen::MatrixXd x(state_dim_ + action_dim_, states.cols());
  x.topRows(state_dim_) = states;
  x.bottomRows(action_dim_) = actions;
  return x;
}

double CriticNetwork::value(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  return net_.forward(stack(state, action))[0];
}

Eigen::VectorXd CriticNetwork::grad_action(const Eigen::VectorXd& state,
                                           const Eigen::VectorXd& action) const {
  return grad_action_batch(state, action, nullptr).col(0);
}

Eigen::VectorXd CriticNetwork::value_batch(const Eigen::MatrixXd& states,
                                           const Eigen::MatrixXd& actions) const {
  return net_.forward_batch(stack(states, actions)).row(0);
}

Eigen::MatrixXd CriticNetwork::grad_action_batch(const Eigen::MatrixXd& states,
                                                 const Eigen::MatrixXd& actions,
                                                 Eigen::VectorXd* values) const {
  Mlp::Cache cache;
  const Eigen::MatrixXd q = net_.forward_batch(stack(states, actions), cache);
  if (values) *values = q.row(0);
  Eigen::MatrixXd input_grad;
  net_.backward_batch(cache, Eigen::MatrixXd::Ones(1, states.cols()), nullptr, &input_grad);
  return input_grad.bottomRows(action_dim_);
}

std::vector<NamedTensor> CriticNetwork::to_tensors() const {
  std::vector<NamedTensor> tensors = net_.to_tensors("q.");
  Eigen::VectorXd dims(2);
  dims << state_dim_, action_dim_;
  tensors.push_back(NamedTensor::from_vector("input_dims", dims));
  return tensors;
}

CriticNetwork CriticNetwork::from_tensors(const std::vector<NamedTensor>& tensors) {
  CriticNetwork c;
  c.net_ = Mlp::from_tensors(tensors, "q.");
  const Eigen::VectorXd dims = find_tensor(tensors, "input_dims").as_vector();
  c.state_dim_ = static_cast<int>(dims[0]);
  c.action_dim_ = static_cast<int>(dims[1]);
  if (c.state_dim_ + c.action_dim_ != c.net_.in_dim())
    throw ConfigError("stored dims disagree with network input size");
  return c;
}

void CriticNetwork::save(const std::string& path) const { save_tensors(path, to_tensors()); }

CriticNetwork CriticNetwork::load(const std::string& path) {
  return from_tensors(load_tensors(path));
}

Eigen::VectorXd bellman_targets(const Critic& target, const TransitionBatch& batch,
                                const GaussianPolicy& actor, int target_samples, double gamma,
                                Rng& rng) {
  const int n = batch.size();
  if (n == 0) throw EmptyBatch("bellman targets on empty batch");
  const int m = target_samples;
  const Eigen::MatrixXd next_means = actor.mean_batch(batch.next_states);
  const Eigen::MatrixXd noise_factor = spd_factor_jittered(actor.covariance());
  const int adim = actor.action_dim();
  // Draws are clipped to the action box, matching the policy as executed.
  // All m draws for one transition happen together so the stream layout is
  // stable; the critic forward runs in n-column chunks to stay cache-local.
  Eigen::MatrixXd draws(adim, static_cast<Eigen::Index>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      draws.col(static_cast<Eigen::Index>(i) * m + j) =
          gauss_sample_factored(next_means.col(i), noise_factor, rng)
              .cwiseMax(actor.action_low())
              .cwiseMin(actor.action_high());
  Eigen::VectorXd mean_next_q = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd chunk_actions(adim, n);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i)
      chunk_actions.col(i) = draws.col(static_cast<Eigen::Index>(i) * m + j);
    mean_next_q += target.value_batch(batch.next_states, chunk_actions);
  }
  mean_next_q /= m;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    if (batch.terminal[static_cast<std::size_t>(i)]) {
      y[i] = batch.rewards[i];
    } else {
      y[i] = batch.rewards[i] + gamma * mean_next_q[i];
    }
  }
  return y;
}

double critic_update(CriticNetwork& net, const CriticNetwork& target, const TransitionBatch& batch,
                     const GaussianPolicy& actor, int target_samples, double gamma, double lr,
                     Rng& rng) {
  const int n = batch.size();
  if (n == 0) throw EmptyBatch("critic update on empty batch");
  const Eigen::VectorXd y = bellman_targets(target, batch, actor, target_samples, gamma, rng);
  Mlp::Cache cache;
  const Eigen::MatrixXd q =
      net.net_.forward_batch(net.stack(batch.states, batch.actions), cache);
  const Eigen::VectorXd resid = q.row(0).transpose() - y;
  const double loss = resid.squaredNorm() / n;
  const Eigen::MatrixXd cot = (2.0 / n) * resid.transpose();
  Eigen::VectorXd grad;
  net.net_.backward_batch(cache, cot, &grad, nullptr);
  Eigen::VectorXd params = net.net_.flat_params();
  net.adam_.apply(params, grad, lr);
  net.net_.set_flat_params(params);
  return loss;
}

void target_sync(const CriticNetwork& net, CriticNetwork& target, double tau) {
  const Eigen::VectorXd p = net.net().flat_params();
  const Eigen::VectorXd q = target.net().flat_params();
  if (p.size() != q.size()) throw ShapeMismatch("target network shape differs from source");
  target.net().set_flat_params(tau * p + (1.0 - tau) * q);
}

QuadraticCritic::QuadraticCritic(const Eigen::MatrixXd& curvature, const Eigen::VectorXd& linear,
                                 double offset, int state_dim)
    : curvature_([curvature](const Eigen::VectorXd&) { return curvature; }),
      linear_([linear](const Eigen::VectorXd&) { return linear; }),
      offset_([offset](const Eigen::VectorXd&) { return offset; }),
      state_dim_(state_dim),
      action_dim_(static_cast<int>(linear.size())) {
  if (curvature.rows() != curvature.cols() || curvature.rows() != linear.size())
    throw DimensionMismatch("quadratic critic shapes disagree");
}

QuadraticCritic::QuadraticCritic(MatrixFn curvature, VectorFn linear, ScalarFn offset,
                                 int state_dim, int action_dim)
    : curvature_(std::move(curvature)),
      linear_(std::move(linear)),
      offset_(std::move(offset)),
      state_dim_(state_dim),
      action_dim_(action_dim) {}

QuadraticCritic QuadraticCritic::naf(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, double v,
                                     int state_dim) {
  return QuadraticCritic(w, -(w * b), 0.5 * b.dot(w * b) + v, state_dim);
}

QuadraticCritic QuadraticCritic::naf(MatrixFn w, VectorFn b, ScalarFn v, int state_dim,
                                     int action_dim) {
  auto linear = [w, b](const Eigen::VectorXd& s) -> Eigen::VectorXd { return -(w(s) * b(s)); };
  auto offset = [w, b, v](const Eigen::VectorXd& s) {
    const Eigen::VectorXd bs = b(s);
    return 0.5 * bs.dot(w(s) * bs) + v(s);
  };
  return QuadraticCritic(std::move(w), std::move(linear), std::move(offset), state_dim,
                         action_dim);
}

double QuadraticCritic::value(const Eigen::VectorXd& state, const Eigen::VectorXd& action) const {
  if (action.size() != action_dim_) throw DimensionMismatch("action dimension disagrees");
  return 0.5 * action.dot(curvature_(state) * action) + action.dot(linear_(state)) +
         offset_(state);
}

Eigen::VectorXd QuadraticCritic::grad_action(const Eigen::VectorXd& state,
                                             const Eigen::VectorXd& action) const {
  if (action.size() != action_dim_) throw DimensionMismatch("action dimension disagrees");
  return curvature_(state) * action + linear_(state);
}

}  // namespace gac
