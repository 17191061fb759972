#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahsnpe/linalg.hpp"
#include "ahsnpe/proposal.hpp"
#include "ahsnpe/tape.hpp"

namespace ahsnpe {

enum class EstimatorKind { kMdn, kMaf };

std::string to_string(EstimatorKind k);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kMaf;
  /// Width of both tanh hidden layers. An MDN accepts 0 (outputs are affine
  /// in the context); a MAF needs at least 1.
  int hidden_units = 32;
  int n_transforms = 5;  // MAF
  int n_components = 1;  // MDN
  int theta_dim = 1;
  int context_dim = 1;

  void validate() const;
  bool operator==(const EstimatorSpec&) const = default;
};

/// Per-coordinate z-scoring of parameters and context.
struct Standardizer {
  Vector theta_mean, theta_sd;
  Vector x_mean, x_sd;

  /// Fitted on training rows; coordinates with sd < 1e-12 are rejected.
  static Standardizer fit(const Matrix& theta, const Matrix& x);
  static Standardizer identity(int theta_dim, int context_dim);

  Matrix theta_forward(const Matrix& theta) const;
  Matrix theta_inverse(const Matrix& u) const;
  Matrix x_forward(const Matrix& x) const;
  /// log |d u / d theta| = -sum log sd.
  double log_jacobian() const { return -theta_sd.array().log().sum(); }
};

/// Named blocks laid out in one flat parameter vector, column-major per block.
class ParamLayout {
 public:
  struct Block {
    std::string name;
    Eigen::Index offset, rows, cols;
  };

  void add(std::string name, Eigen::Index rows, Eigen::Index cols);
  const Block& block(const std::string& name) const;
  const std::vector<Block>& blocks() const { return blocks_; }
  Eigen::Index size() const { return size_; }

 private:
  std::vector<Block> blocks_;
  Eigen::Index size_ = 0;
};

ParamLayout make_layout(const EstimatorSpec& spec);

/// Conditional density q(theta | x), either a mixture density network with
/// full-covariance components or a masked autoregressive flow with a standard
/// Normal base. Immutable once built; concurrent const use is safe.
class ConditionalDensityEstimator {
 public:
  ConditionalDensityEstimator() = default;
  /// A trained estimator with the given parameters.
  ConditionalDensityEstimator(EstimatorSpec spec, Standardizer standardizer, Vector params);

  /// Random initial parameters. With `identity`, the MAF output layers start at
  /// zero so the flow is the identity map.
  static Vector initial_parameters(const EstimatorSpec& spec, Rng& rng, bool identity = false);

  bool trained() const { return trained_; }
  const EstimatorSpec& spec() const { return spec_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const Vector& parameters() const { return params_; }
  const ParamLayout& layout() const { return layout_; }

  double log_prob(const Vector& theta, const Vector& x) const;
  /// One log density per row pair (theta_b, x_b).
  Vector log_prob_batch(const Matrix& theta, const Matrix& x) const;
  Matrix sample(const Vector& x, Eigen::Index n, Rng& rng) const;

  /// MAF only: theta -> base variable z, with log |dz/dtheta| per row.
  std::pair<Matrix, Vector> forward(const Matrix& theta, const Matrix& x) const;
  Matrix inverse(const Matrix& z, const Matrix& x) const;

  /// Records log q(u | c) in standardized coordinates (without the
  /// standardization Jacobian) as an r x 1 node, reading parameters from
  /// `blocks` (one node per layout block).
  ad::Var build_log_prob(ad::Tape& tape, const std::vector<ad::Var>& blocks, const Matrix& u,
                         const Matrix& c) const;
  std::vector<ad::Var> parameter_nodes(ad::Tape& tape, const Vector& params, bool trainable) const;

  nlohmann::json to_json() const;
  static ConditionalDensityEstimator from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ConditionalDensityEstimator load(const std::string& path);

 private:
  void require_trained() const;

  EstimatorSpec spec_;
  Standardizer standardizer_;
  Vector params_;
  ParamLayout layout_;
  bool trained_ = false;
};

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 5e-4;
  int max_epochs = 200;
  int patience = 20;
  double val_fraction = 0.1;
  int n_atoms = 10;
  double grad_clip = 5.0;
  std::uint64_t seed = 0;
  /// Start from these parameters instead of a random initialization.
  Vector warm_start;

  void validate() const;
};

struct TrainingReport {
  int epochs = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

/// Maximum likelihood: minimizes the mean of -log q(theta_b | x_b).
ConditionalDensityEstimator fit_npe(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                    const TrainConfig& cfg, TrainingReport* report = nullptr);

/// Atomic loss for pairs drawn from `proposal`. Atoms are uniform over the
/// batch, so each contrast term is weighted by 1 / prior(theta); the proposal
/// density cancels and is only checked for support.
ConditionalDensityEstimator fit_snpe_atomic(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                            const Gaussian& prior, const ProposalMixture& proposal,
                                            const TrainConfig& cfg, TrainingReport* report = nullptr);

/// Atomic loss with a precomputed log weight per row added to log q.
ConditionalDensityEstimator fit_atomic(const EstimatorSpec& spec, const Matrix& theta, const Matrix& x,
                                       const Vector& log_ratio, const TrainConfig& cfg,
                                       TrainingReport* report = nullptr);

/// Mean atomic loss of one batch under the estimator's current parameters.
/// Each item contrasts against min(n_atoms, B) - 1 other batch members drawn
/// without replacement.
double atomic_loss(const ConditionalDensityEstimator& est, const Matrix& theta, const Matrix& x,
                   const Vector& log_ratio, int n_atoms, Rng& rng);

/// Largest |a - b| / max(|a|, |b|, 1e-3) between the reverse-mode gradient of
/// log_prob(theta, x) with respect to every parameter and central differences
/// with step 1e-5. Zero when there are no parameters.
double grad_check(const ConditionalDensityEstimator& est, const Vector& theta, const Vector& x);

/// The comparison used by grad_check.
double max_relative_error(const Vector& analytic, const Vector& numeric);

}  // namespace ahsnpe
