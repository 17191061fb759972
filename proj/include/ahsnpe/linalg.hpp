#pragma once

#include "ahsnpe/core.hpp"

namespace ahsnpe {

inline constexpr double kJitter = 1e-9;

/// Returns (A + A^T) / 2.
Matrix symmetrize(const Matrix& a);

/// Lower Cholesky factor of a symmetric PSD matrix. A failed factorization is
/// retried once with `jitter * I` added; a second failure throws NumericalError.
Matrix cholesky_with_jitter(const Matrix& cov, double jitter = kJitter);

/// True if the symmetric matrix admits a Cholesky factor after jitter.
bool is_psd(const Matrix& cov, double jitter = kJitter);

/// log N(x; mean, L L^T) given the lower Cholesky factor L.
double mvn_log_density(const Vector& x, const Vector& mean, const Matrix& chol);

/// Row-wise version of mvn_log_density over the rows of `xs`.
Vector mvn_log_density_rows(const Matrix& xs, const Vector& mean, const Matrix& chol);

/// n independent draws (rows) from N(mean, L L^T).
Matrix sample_mvn(const Vector& mean, const Matrix& chol, Eigen::Index n, Rng& rng);

/// Column means of the rows of `samples`.
Vector sample_mean(const Matrix& samples);

/// Sample covariance of the rows; `unbiased` selects 1/(N-1) over 1/N.
Matrix sample_covariance(const Matrix& samples, bool unbiased);

/// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Vector& v);

/// A multivariate Normal density with cached Cholesky factor.
struct Gaussian {
  Vector mean;
  Matrix cov;
  Matrix chol;

  Gaussian() = default;
  Gaussian(Vector mean_, Matrix cov_);

  double log_density(const Vector& x) const { return mvn_log_density(x, mean, chol); }
  Vector log_density_rows(const Matrix& xs) const { return mvn_log_density_rows(xs, mean, chol); }
};

}  // namespace ahsnpe
