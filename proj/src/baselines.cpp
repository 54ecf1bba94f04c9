#include "gac/baselines.hpp"

#include "gac/errors.hpp"

namespace gac {

DpgDirection dpg_direction(const GaussianPolicy& actor, const Critic& critic,
                           const Eigen::MatrixXd& states) {
  if (states.cols() == 0) throw EmptyBatch("direction over an empty batch");
  const Eigen::MatrixXd means = actor.mean_batch(states);
  const Eigen::MatrixXd grads = critic.grad_action_batch(states, means, nullptr);
  const double inv_n = 1.0 / static_cast<double>(states.cols());
  DpgDirection dir;
  dir.values = actor.jacobian_vjp_batch(states, grads * inv_n);
  return dir;
}

void dpg_step(GaussianPolicy& actor, const DpgDirection& direction, double alpha) {
  Eigen::VectorXd params = actor.mean_net().flat_params();
  if (params.size() != direction.values.size())
    throw ShapeMismatch("direction does not match actor parameters");
  params += alpha * direction.values;
  actor.mean_net().set_flat_params(params);
}

}  // namespace gac
