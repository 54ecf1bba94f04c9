#include "gac/gauss.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "gac/errors.hpp"

namespace gac {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_square(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("matrix is not square");
}

void check_gaussian(const Gaussian& p) {
  if (p.cov.rows() != p.cov.cols() || p.cov.rows() != p.mean.size())
    throw DimensionMismatch("gaussian mean/covariance sizes disagree");
}

}  // namespace

Eigen::MatrixXd spd_factor(const Eigen::MatrixXd& m) {
  check_square(m);
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asym > 1e-12 * scale)
    throw DimensionMismatch("matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("cholesky factorization failed");
  Eigen::MatrixXd lower = llt.matrixL();
  // Eigen can succeed with a zero trailing pivot on singular input; enforce
  // strictly positive pivots.
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i)))
      throw NotPositiveDefinite("cholesky pivot is not positive");
  }
  return lower;
}

Eigen::MatrixXd spd_factor_jittered(const Eigen::MatrixXd& m) {
  try {
    return spd_factor(m);
  } catch (const NotPositiveDefinite&) {
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += kCovarianceJitter;
    return spd_factor(jittered);
  }
}

double spd_log_det(const Eigen::MatrixXd& factor) {
  return 2.0 * factor.diagonal().array().log().sum();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd lower = spd_factor(m);
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd half = lower.triangularView<Eigen::Lower>().solve(identity);
  return lower.transpose().triangularView<Eigen::Upper>().solve(half);
}

double gauss_kl(const Gaussian& p, const Gaussian& q) {
  check_gaussian(p);
  check_gaussian(q);
  if (p.dim() != q.dim()) throw DimensionMismatch("gaussian dimensions disagree");
  const int d = p.dim();
  const Eigen::MatrixXd lp = spd_factor(p.cov);
  const Eigen::MatrixXd lq = spd_factor(q.cov);
  // tr(Sq^-1 Sp) = ||Lq^-1 Lp||_F^2
  const Eigen::MatrixXd w = lq.triangularView<Eigen::Lower>().solve(lp);
  const double trace_term = w.squaredNorm();
  const Eigen::VectorXd diff = q.mean - p.mean;
  const Eigen::VectorXd y = lq.triangularView<Eigen::Lower>().solve(diff);
  const double maha = y.squaredNorm();
  return 0.5 * (trace_term + maha - d + spd_log_det(lq) - spd_log_det(lp));
}

double gauss_entropy(const Gaussian& p) {
  check_gaussian(p);
  const Eigen::MatrixXd lower = spd_factor(p.cov);
  return 0.5 * (p.dim() * (1.0 + kLog2Pi) + spd_log_det(lower));
}

double gauss_log_density(const Gaussian& p, const Eigen::VectorXd& x) {
  check_gaussian(p);
  if (x.size() != p.mean.size()) throw DimensionMismatch("point dimension disagrees");
  const Eigen::MatrixXd lower = spd_factor(p.cov);
  const Eigen::VectorXd y = lower.triangularView<Eigen::Lower>().solve(x - p.mean);
  return -0.5 * (p.dim() * kLog2Pi + spd_log_det(lower) + y.squaredNorm());
}

Eigen::VectorXd gauss_sample(const Gaussian& p, Rng& rng) {
  check_gaussian(p);
  const Eigen::MatrixXd lower = spd_factor_jittered(p.cov);
  return gauss_sample_factored(p.mean, lower, rng);
}

Eigen::VectorXd gauss_sample_factored(const Eigen::VectorXd& mean, const Eigen::MatrixXd& factor,
                                      Rng& rng) {
  return mean + factor * rng.normal_vector(static_cast<int>(mean.size()));
}

}  // namespace gac
