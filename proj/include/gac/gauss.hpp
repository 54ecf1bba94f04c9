#ifndef GAC_GAUSS_HPP
#define GAC_GAUSS_HPP

#include <Eigen/Core>

#include "gac/rng.hpp"

namespace gac {

// Jitter added once to a covariance whose factorization fails; the retry
// either succeeds or the NotPositiveDefinite error propagates.
inline constexpr double kCovarianceJitter = 1e-8;

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
};

// Lower-triangular factor L with m = L L^T. Throws NotPositiveDefinite when a
// pivot is not strictly positive.
Eigen::MatrixXd spd_factor(const Eigen::MatrixXd& m);

// spd_factor with one jitter retry (m + kCovarianceJitter*I).
Eigen::MatrixXd spd_factor_jittered(const Eigen::MatrixXd& m);

double spd_log_det(const Eigen::MatrixXd& factor);

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m);

// KL(p || q) in nats for Gaussians of equal dimension.
double gauss_kl(const Gaussian& p, const Gaussian& q);

// Shannon differential entropy 0.5 * ln|2*pi*e*cov| in nats.
double gauss_entropy(const Gaussian& p);

double gauss_log_density(const Gaussian& p, const Eigen::VectorXd& x);

Eigen::VectorXd gauss_sample(const Gaussian& p, Rng& rng);

// Draw using a precomputed factor of the covariance.
Eigen::VectorXd gauss_sample_factored(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor,
                                      Rng& rng);

}  // namespace gac

#endif
