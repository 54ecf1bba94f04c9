#ifndef GAC_BASELINES_HPP
#define GAC_BASELINES_HPP

#include <Eigen/Core>

#include "gac/actor.hpp"
#include "gac/critic.hpp"

namespace gac {

// Deterministic policy gradient ascent direction in the actor's mean-network
// parameter layout; comparison baseline and limiting-case oracle.
struct DpgDirection {
  Eigen::VectorXd values;
};

// mean_n of grad_theta mean(s_n) . grad_a Q(s_n, a)|_{a = mean(s_n)}.
DpgDirection dpg_direction(const GaussianPolicy& actor, const Critic& critic,
                           const Eigen::MatrixXd& states);

// theta <- theta + alpha * direction.
void dpg_step(GaussianPolicy& actor, const DpgDirection& direction, double alpha);

}  // namespace gac

#endif
