#include "ahsnpe/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace ahsnpe {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix cholesky_with_jitter(const Matrix& cov, double jitter) {
  if (cov.rows() != cov.cols()) throw InvalidArgument("covariance must be square");
  if (!cov.allFinite()) throw InvalidArgument("covariance has non-finite entries");
  const Matrix sym = symmetrize(cov);
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  llt.compute(sym + jitter * Matrix::Identity(sym.rows(), sym.cols()));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  throw NumericalError("covariance is not positive semi-definite");
}

bool is_psd(const Matrix& cov, double jitter) {
  try {
    cholesky_with_jitter(cov, jitter);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

double mvn_log_density(const Vector& x, const Vector& mean, const Matrix& chol) {
  const auto d = static_cast<double>(x.size());
  const Vector z = chol.triangularView<Eigen::Lower>().solve(x - mean);
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

Vector mvn_log_density_rows(const Matrix& xs, const Vector& mean, const Matrix& chol) {
  const auto d = static_cast<double>(xs.cols());
  const Matrix centred = (xs.rowwise() - mean.transpose()).transpose();
  const Matrix z = chol.triangularView<Eigen::Lower>().solve(centred);
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  const double c = d * std::log(2.0 * std::numbers::pi) + log_det;
  return (-0.5 * (z.colwise().squaredNorm().array() + c)).matrix().transpose();
}

Matrix sample_mvn(const Vector& mean, const Matrix& chol, Eigen::Index n, Rng& rng) {
  const Matrix z = standard_normal(n, mean.size(), rng);
  Matrix out = z * chol.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

Vector sample_mean(const Matrix& samples) { return samples.colwise().mean().transpose(); }

Matrix sample_covariance(const Matrix& samples, bool unbiased) {
  const Eigen::Index n = samples.rows();
  if (n < 1 || (unbiased && n < 2)) throw InvalidArgument("too few samples for a covariance");
  const Matrix centred = samples.rowwise() - samples.colwise().mean();
  const double denom = unbiased ? static_cast<double>(n - 1) : static_cast<double>(n);
  return symmetrize(centred.transpose() * centred / denom);
}

double log_sum_exp(const Vector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

Gaussian::Gaussian(Vector mean_, Matrix cov_)
    : mean(std::move(mean_)), cov(symmetrize(cov_)), chol(cholesky_with_jitter(cov)) {
  if (mean.size() != cov.rows()) throw InvalidArgument("Gaussian mean/covariance size mismatch");
}

}  // namespace ahsnpe
