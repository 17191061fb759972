#pragma once

// Independent reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ahsnpe/driver.hpp"
#include "ahsnpe/graph.hpp"
#include "ahsnpe/niw.hpp"

namespace testing {

using namespace ahsnpe;

// Brute force over all node triples: the number of common neighbours of
// every dyad, then the weighted sums straight from the definition.
struct BruteStats {
  std::vector<std::int64_t> p, np;
  double edges = 0, gwesp = 0, gwnsp = 0;
};

inline BruteStats brute_force(const Graph& g, double tau) {
  const int n = g.n_nodes();
  BruteStats b;
  b.p.assign(static_cast<std::size_t>(std::max(n - 1, 1)), 0);
  b.np.assign(static_cast<std::size_t>(std::max(n - 1, 1)), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      int k_count = 0;
      for (int k = 0; k < n; ++k)
        if (k != i && k != j && g.has_edge(i, k) && g.has_edge(j, k)) ++k_count;
      const bool tie = g.has_edge(i, j);
      if (tie) b.edges += 1;
      if (k_count == 0) continue;
      (tie ? b.p : b.np)[static_cast<std::size_t>(k_count)] += 1;
      const double w = std::exp(tau) * (1.0 - std::pow(1.0 - std::exp(-tau), k_count));
      (tie ? b.gwesp : b.gwnsp) += w;
    }
  return b;
}

// Conjugate update applied one point at a time.
inline NiwHyper sequential_update(NiwHyper h, const Matrix& points) {
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const Vector y = points.row(r).transpose();
    const Vector diff = y - h.mu0;
    h.psi0 += h.kappa0 / (h.kappa0 + 1.0) * diff * diff.transpose();
    h.mu0 = (h.kappa0 * h.mu0 + y) / (h.kappa0 + 1.0);
    h.kappa0 += 1.0;
    h.nu0 += 1.0;
  }
  return h;
}

// Exact posterior of the edge parameter for one edges-only graph, on a grid.
struct GridPosterior {
  std::vector<double> grid, cdf;
  double mean = 0.0;
};

inline GridPosterior edges_grid_posterior(double edges, double dyads, double prior_mean, double prior_var) {
  GridPosterior g;
  std::vector<double> logp;
  for (double t = -8.0; t <= 6.0; t += 1e-3) {
    g.grid.push_back(t);
    logp.push_back(edges * t - dyads * std::log1p(std::exp(t)) - (t - prior_mean) * (t - prior_mean) / (2 * prior_var));
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double z = 0.0, m = 0.0;
  for (std::size_t k = 0; k < logp.size(); ++k) {
    const double w = std::exp(logp[k] - top);
    z += w;
    m += w * g.grid[k];
    g.cdf.push_back(z);
  }
  for (auto& c : g.cdf) c /= z;
  g.mean = m / z;
  return g;
}

// Sequential rank-one conjugate updates, one pseudo-observation at a time,
// followed by adding the per-item covariances to the scale matrix.
inline NiwHyper sequential_niw(const NiwHyper& prior, const std::vector<MomentPair>& moments) {
  Vector mu = prior.mu0;
  double kappa = prior.kappa0, nu = prior.nu0;
  Matrix psi = prior.psi0;
  for (const auto& m : moments) {
    const Vector dev = m.mean - mu;
    psi += kappa / (kappa + 1.0) * dev * dev.transpose() + m.cov;
    mu = (kappa * mu + m.mean) / (kappa + 1.0);
    kappa += 1.0;
    nu += 1.0;
  }
  return {mu, kappa, psi, nu};
}

}  // namespace testing
