#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ahsnpe/driver.hpp"

namespace ahsnpe {

/// sqrt((p - m)^T C^{-1} (p - m)) with m, C the sample mean and unbiased
/// covariance of the rows of `samples`.
double mahalanobis(const Vector& point, const Matrix& samples);

inline constexpr std::array<double, 5> kSummaryLevels{0.025, 0.25, 0.5, 0.75, 0.975};

struct PosteriorSummary {
  Vector mean;
  Matrix cov;
  Matrix quantiles;  // one row per entry of kSummaryLevels, one column per coordinate
  Eigen::Index n_samples = 0;
};

/// Type-7 (linear interpolation) empirical quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double p);

PosteriorSummary summarize(const Matrix& samples);

struct PpcResult {
  Vector observed;
  Vector pred_mean;
  Vector pred_sd;
  /// NaN where no z-score is defined.
  Vector z;
  /// False when a single draw leaves the predictive SD undefined.
  bool z_available = false;
  Eigen::Index n_samples = 0;
};

/// One simulated statistic vector per parameter draw, compared with the observation.
PpcResult posterior_predictive(const Vector& x_obs, const Matrix& theta_samples, const Simulator& simulator,
                               std::uint64_t seed);

struct ReportInput {
  std::vector<RoundRecord> history;
  std::vector<std::string> parameter_names;
  /// Rows of (theta_g, vec(Sigma_g)) drawn from the final NIW factor; may be empty.
  Matrix group_samples;
  Matrix local_means;  // n x d
  std::vector<PpcResult> ppc;
  /// Reference sample of theta_g, e.g. from the Gibbs sampler, for the per-round distance.
  std::optional<Matrix> reference_samples;
};

/// Writes the CSV tables and SVG plots into out_dir and returns their paths.
std::vector<std::filesystem::path> emit_reports(const ReportInput& in, const std::filesystem::path& out_dir);

/// Minimal SVG line chart; each series is a list of (x, y) points.
std::string svg_line_plot(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<std::vector<std::pair<double, double>>>& series);

}  // namespace ahsnpe
