#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ahsnpe/linalg.hpp"

namespace ahsnpe {

struct MixtureComponent {
  Vector mean;
  Matrix cov;
  Matrix chol;
  std::int64_t n_pairs = 0;
  std::string round_tag;
};

/// Mixture of Normals whose weights are implied by pair counts,
/// w_t = n_pairs_t / N. Updates return new values; a mixture is never mutated
/// after construction, so snapshots can be shared freely.
class ProposalMixture {
 public:
  ProposalMixture() = default;

  /// Appends a component; the tag must be new and cov PSD (after jitter).
  ProposalMixture add_component(const Vector& mean, const Matrix& cov, std::int64_t n_pairs,
                                const std::string& tag) const;
  /// Drops the tagged component and returns its pair count alongside.
  std::pair<ProposalMixture, std::int64_t> remove_component(const std::string& tag) const;

  double log_density(const Vector& theta) const;
  double density(const Vector& theta) const;
  Vector log_density_batch(const Matrix& thetas) const;

  Vector weights() const;
  std::int64_t total_pairs() const { return total_; }
  bool empty() const { return components_.empty(); }
  bool contains(const std::string& tag) const;
  int dim() const;
  const std::vector<MixtureComponent>& components() const { return components_; }

 private:
  std::vector<MixtureComponent> components_;
  std::int64_t total_ = 0;
};

/// n draws from N(mean, cov). An all-zero covariance is rejected.
Matrix sample_component(const Vector& mean, const Matrix& cov, Eigen::Index n, Rng& rng);

}  // namespace ahsnpe
