#include <algorithm>
#include <cmath>
#include <limits>

#include "ahsnpe/diagnostics.hpp"

namespace ahsnpe {

double mahalanobis(const Vector& point, const Matrix& samples) {
  if (point.size() != samples.cols()) throw InvalidArgument("point and samples differ in dimension");
  if (samples.rows() <= samples.cols()) throw InvalidArgument("mahalanobis needs more samples than dimensions");
  const Vector mean = sample_mean(samples);
  const Matrix cov = sample_covariance(samples, true);
  const Matrix chol = cholesky_with_jitter(cov);
  const Vector z = chol.triangularView<Eigen::Lower>().solve(point - mean);
  return z.norm();
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

PosteriorSummary summarize(const Matrix& samples) {
  if (samples.rows() < 2) throw InvalidArgument("summaries need at least two samples");
  PosteriorSummary s;
  s.n_samples = samples.rows();
  s.mean = sample_mean(samples);
  s.cov = sample_covariance(samples, true);
  s.quantiles.resize(static_cast<Eigen::Index>(kSummaryLevels.size()), samples.cols());
  std::vector<double> col(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) col[static_cast<std::size_t>(i)] = samples(i, k);
    std::sort(col.begin(), col.end());
    for (std::size_t q = 0; q < kSummaryLevels.size(); ++q)
      s.quantiles(static_cast<Eigen::Index>(q), k) = quantile_sorted(col, kSummaryLevels[q]);
  }
  return s;
}

PpcResult posterior_predictive(const Vector& x_obs, const Matrix& theta_samples, const Simulator& simulator,
                               std::uint64_t seed) {
  if (theta_samples.rows() < 1) throw InvalidArgument("posterior predictive needs at least one draw");
  const Matrix pred = simulator(theta_samples, seed);
  if (pred.cols() != x_obs.size()) throw InvalidArgument("simulated statistics do not match the observation");
  PpcResult r;
  r.observed = x_obs;
  r.n_samples = pred.rows();
  r.pred_mean = sample_mean(pred);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.z = Vector::Constant(x_obs.size(), nan);
  if (pred.rows() < 2) {
    r.pred_sd = Vector::Constant(x_obs.size(), nan);
    r.z_available = false;
    return r;
  }
  r.pred_sd = sample_covariance(pred, true).diagonal().cwiseSqrt();
  r.z_available = true;
  for (Eigen::Index k = 0; k < x_obs.size(); ++k)
    if (r.pred_sd[k] > 0.0) r.z[k] = (x_obs[k] - r.pred_mean[k]) / r.pred_sd[k];
  return r;
}

}  // namespace ahsnpe
