#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahsnpe/ergm.hpp"
#include "ahsnpe/flow.hpp"
#include "ahsnpe/niw.hpp"
#include "ahsnpe/proposal.hpp"

namespace ahsnpe {

/// Posterior mean and covariance of one local parameter.
struct MomentPair {
  Vector mean;
  Matrix cov;
};

struct MStepResult {
  NiwHyper posterior;
  Vector theta_g;  // MAP: mu_n
  Matrix sigma_g;  // MAP: psi_n / (nu_n + d + 1)
};

/// Closed-form variational update of the group-level NIW factor from the local
/// moments. With no moments the hyper-prior is returned unchanged.
MStepResult m_step(const NiwHyper& niw, std::span<const MomentPair> moments);

/// Sample mean and 1/S covariance of the rows, symmetrized.
MomentPair moments_from_samples(const Matrix& samples);

MomentPair moments_from_estimator(const ConditionalDensityEstimator& est, const Vector& x, Eigen::Index n_samples,
                                  Rng& rng);

/// Mean over coordinates of |now - before| / |before|; coordinates with
/// |before| < 1e-8 contribute the absolute change instead.
double relative_change(const Vector& now, const Vector& before);

struct Schedule {
  int t_initial = 4;
  std::int64_t n_initial = 100000;
  std::int64_t n_round = 20000;
  std::int64_t n_refined = 50000;
  double cov_inflation = 5.0;
  /// Empty selects the zero vector.
  Vector initial_mean;
  double initial_cov_scale = 10.0;
  EstimatorSpec burn_in_estimator{EstimatorKind::kMaf, 32, 5, 1, 1, 1};
  EstimatorSpec main_estimator{EstimatorKind::kMaf, 64, 10, 1, 1, 1};
  int max_rounds = 30;
  double tolerance = 0.01;
  int consecutive = 2;
  /// Posterior draws per observation for the moments inside the loop.
  Eigen::Index moment_samples = 10000;
  /// Posterior draws per observation for reporting.
  Eigen::Index final_samples = 100000;

  void validate() const;
};

/// Maps parameter rows to summary-statistic rows. Row b must depend only on
/// (theta_b, seed, b).
using Simulator = std::function<Matrix(const Matrix& thetas, std::uint64_t seed)>;

Simulator ergm_simulator(ErgmModel model, int n_nodes, SimConfig sim, unsigned threads);
/// x = theta + e with e ~ N(0, noise_cov).
Simulator gaussian_simulator(Matrix noise_cov);

/// What the driver needs from a trained estimator.
struct TrainedPosterior {
  std::function<Matrix(const Vector& x, Eigen::Index n, Rng& rng)> sample;
  nlohmann::json checkpoint;
  TrainingReport report;
};

using Trainer = std::function<TrainedPosterior(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                               const Gaussian& prior, const ProposalMixture& proposal,
                                               const TrainConfig& cfg)>;

/// Atomic-loss training of a ConditionalDensityEstimator.
Trainer default_trainer();

/// Training pairs grouped by the proposal component that generated them.
class TrainingSet {
 public:
  void add(const std::string& tag, Matrix theta, Matrix x);
  /// Drops every pair with this tag; returns how many were dropped.
  std::int64_t remove(const std::string& tag);
  std::int64_t size() const;
  std::int64_t count(const std::string& tag) const;
  std::vector<std::string> tags() const;
  /// All pairs stacked in insertion order.
  std::pair<Matrix, Matrix> assemble() const;
  /// FNV-1a over tags and values.
  std::uint64_t digest() const;

  void save(const std::filesystem::path& path) const;
  static TrainingSet load(const std::filesystem::path& path);

 private:
  struct Part {
    std::string tag;
    Matrix theta, x;
  };
  std::vector<Part> parts_;
};

struct StageTimes {
  double simulation = 0.0;
  double training = 0.0;
  double inference = 0.0;
};

struct RoundRecord {
  int round = 0;
  Vector theta_g;
  Matrix sigma_g;
  NiwHyper posterior;
  /// Absent for the first round.
  std::optional<double> relative_change;
  EstimatorSpec estimator;
  /// Tag of the pairs drawn this round.
  std::string drawn_tag;
  std::int64_t simulated_pairs = 0;
  std::map<std::string, std::int64_t> dataset_counts;
  std::int64_t dataset_size = 0;
  std::uint64_t dataset_digest = 0;
  std::vector<MixtureComponent> proposal;
  bool swapped = false;
  std::int64_t removed_pairs = 0;
  Vector refined_mean;
  Matrix refined_cov;
  StageTimes times;
  TrainingReport training;
  Matrix local_means;  // n x d
};

nlohmann::json to_json(const RoundRecord& r);
RoundRecord round_from_json(const nlohmann::json& j);

struct RunConfig {
  Schedule schedule;
  TrainConfig train;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// When set, every round is persisted there and an interrupted run resumes.
  std::filesystem::path out_dir;
  Trainer trainer;  // empty selects default_trainer()
};

struct HierResult {
  std::vector<RoundRecord> history;
  bool converged = false;
  /// Round whose state is returned: the last one when converged, otherwise
  /// the one with the smallest relative change.
  int selected_round = 0;
  Vector theta_g;
  Matrix sigma_g;
  NiwHyper posterior;
  ProposalMixture proposal;
  TrainingSet dataset;
  TrainedPosterior estimator;
  std::int64_t total_simulations = 0;
};

/// Variational EM over the hierarchical model with the ERGM-adjusted proposal
/// schedule: wide initial component, one new component per round centred on
/// the current group-level prior, and at round t_initial the initial pairs are
/// replaced by a refined component and the estimator is upgraded.
HierResult run(const Matrix& observations, const NiwHyper& niw, const Simulator& simulator, const RunConfig& cfg);

}  // namespace ahsnpe
