#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ahsnpe/ergm.hpp"
#include "ahsnpe/linalg.hpp"
#include "ahsnpe/niw.hpp"

namespace ahsnpe {

struct ExchangeConfig {
  std::int64_t n_iters = 10000;
  /// Random-walk covariance; empty selects 0.1^2 * I.
  Matrix rw_cov;
  /// Unrecorded iterations during which the random-walk scale is tuned
  /// toward `target_acceptance`; the scale is frozen afterwards.
  std::int64_t adapt_iters = 1000;
  double target_acceptance = 0.25;
  /// Exchange updates between recorded draws.
  std::int64_t thin = 1;
  SimConfig aux_sim;
  std::uint64_t seed = 0;
  /// Starting point; empty selects the prior mean.
  Vector init;
};

struct PosteriorChain {
  Matrix draws;
  std::int64_t accepted = 0;
  std::int64_t proposed = 0;
  double acceptance_rate = 0.0;
  /// Random-walk covariance in effect after adaptation.
  Matrix rw_cov;
};

/// One exchange update for a single network. The auxiliary network is a fresh
/// ERGM draw at the proposed parameter, so the intractable normalizers cancel.
class ExchangeKernel {
 public:
  ExchangeKernel(ErgmModel model, int n_nodes, Vector observed_stats, SimConfig aux_sim);

  /// Proposes theta' = theta + L z, and accepts with
  ///   exp((theta' - theta) . (h(y) - h(y'))) * prior(theta') / prior(theta).
  bool step(Vector& theta, const Gaussian& prior, const Matrix& rw_chol, Rng& rng) const;

  const ErgmModel& model() const { return model_; }

 private:
  ErgmModel model_;
  int n_nodes_;
  Vector observed_;
  SimConfig aux_sim_;
};

PosteriorChain exchange_fit(const Graph& observed, const ErgmModel& model, const Vector& prior_mean,
                            const Matrix& prior_cov, const ExchangeConfig& cfg);

struct HierGibbsConfig {
  std::int64_t n_iters = 2000;
  /// Discarded leading sweeps; local random-walk scales adapt during them.
  std::int64_t burn_in = 500;
  Matrix local_rw_cov;
  double target_acceptance = 0.25;
  SimConfig aux_sim;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct HierChain {
  Matrix theta_g;                 // n_iters x d
  Matrix sigma_g;                 // n_iters x d*d, column-major flattening
  std::vector<Matrix> local;      // one n_iters x d chain per observation
  Vector local_acceptance;

  Matrix sigma_g_at(Eigen::Index iter) const;
};

/// Updates theta_i in place under the conditional prior N(theta_g, Sigma_g);
/// returns whether the state moved. `sweep` counts from 0 including burn-in.
using LocalKernel =
    std::function<bool(std::size_t i, Vector& theta_i, const Gaussian& prior, std::int64_t sweep, Rng& rng)>;

/// Metropolis-within-Gibbs over the hierarchical model: every local parameter
/// is updated by `kernel`, then (theta_g, Sigma_g) is drawn exactly from its
/// NIW conditional given the current locals.
HierChain hier_gibbs_fit(const NiwHyper& niw, Matrix init_locals, const LocalKernel& kernel,
                         const HierGibbsConfig& cfg);

/// Multi-network ERGM fit with exchange updates for the local parameters.
HierChain hier_gibbs_fit(std::span<const Graph> graphs, const ErgmModel& model, const NiwHyper& niw,
                         const HierGibbsConfig& cfg);

}  // namespace ahsnpe
