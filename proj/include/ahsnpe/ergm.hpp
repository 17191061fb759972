#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ahsnpe/graph.hpp"

namespace ahsnpe {

enum class Statistic { kEdges = 0, kGwesp = 1, kGwnsp = 2 };

std::string to_string(Statistic s);
Statistic statistic_from_string(const std::string& name);

/// The active ERGM terms. Parameters and statistics are vectors over `terms`,
/// in that order; inactive terms have coefficient zero.
struct ErgmModel {
  std::vector<Statistic> terms{Statistic::kEdges, Statistic::kGwesp, Statistic::kGwnsp};
  double decay = kDefaultDecay;

  static ErgmModel edges_only() { return ErgmModel{{Statistic::kEdges}, kDefaultDecay}; }

  int dim() const { return static_cast<int>(terms.size()); }
  Vector project(const SummaryStats& s) const;
  Vector project(const Eigen::Vector3d& full) const;
  /// Coefficient vector over all three statistics.
  Eigen::Vector3d expand(const Vector& theta) const;
  std::vector<std::string> names() const;
};

enum class DyadProposal { kUniformDyad, kTieNoTie };

/// MH schedule for one network draw. Negative burn_in/thin select the
/// dyad-scaled defaults 20 * n(n-1)/2 and 5 * n(n-1)/2.
struct SimConfig {
  std::int64_t burn_in = -1;
  std::int64_t thin = -1;
  DyadProposal proposal = DyadProposal::kTieNoTie;
  std::uint64_t seed = 0;

  std::int64_t resolved_burn_in(int n_nodes) const;
  std::int64_t resolved_thin(int n_nodes) const;
  void validate() const;
};

/// Metropolis-Hastings state: a graph plus an indexable edge list so that the
/// tie-no-tie proposal can pick an existing edge uniformly in O(1).
class ErgmChain {
 public:
  ErgmChain(Graph start, const ErgmModel& model, Vector theta, DyadProposal proposal);

  /// One proposed toggle; returns true if accepted.
  bool step(Rng& rng);
  void run(std::int64_t steps, Rng& rng);

  const Graph& graph() const { return g_; }
  std::int64_t accepted() const { return accepted_; }
  std::int64_t proposed() const { return proposed_; }

 private:
  void apply_toggle(int i, int j);
  Dyad uniform_dyad(Rng& rng) const;

  Graph g_;
  Eigen::Vector3d theta_full_;
  double decay_;
  DyadProposal proposal_;
  std::vector<Dyad> edges_;
  std::vector<int> edge_pos_;  // n*n; -1 when absent
  std::int64_t accepted_ = 0;
  std::int64_t proposed_ = 0;
};

/// A single Metropolis-Hastings toggle from `g`.
Graph mh_step(const Graph& g, const ErgmModel& model, const Vector& theta, DyadProposal proposal, Rng& rng);

/// Runs burn_in + thin steps from the empty graph with Rng(cfg.seed).
Graph simulate(const ErgmModel& model, const Vector& theta, int n_nodes, const SimConfig& cfg);

/// Same as simulate() with an externally supplied generator.
Graph simulate_with(const ErgmModel& model, const Vector& theta, int n_nodes, const SimConfig& cfg, Rng& rng);

/// One network per row of `thetas`, reduced to summary statistics. Item b uses
/// the stream make_rng(cfg.seed, id_b), where id_b is stream_ids[b] when given
/// and b otherwise, so results do not depend on scheduling and follow their
/// items under reordering.
std::vector<SummaryStats> simulate_stats_batch(const ErgmModel& model, const Matrix& thetas, int n_nodes,
                                               const SimConfig& cfg, unsigned threads = 1,
                                               std::span<const std::uint64_t> stream_ids = {});

}  // namespace ahsnpe
