#include "ahsnpe/graph.hpp"

#include <cmath>

namespace ahsnpe {

SharedPartnerCounts count_shared_partners(const Graph& g) {
  const int n = g.n_nodes();
  const std::size_t len = static_cast<std::size_t>(std::max(n - 1, 1));
  SharedPartnerCounts out{std::vector<std::int64_t>(len, 0), std::vector<std::int64_t>(len, 0)};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const int k = g.shared_partners(i, j);
      if (k == 0) continue;
      (g.has_edge(i, j) ? out.connected : out.unconnected)[static_cast<std::size_t>(k)] += 1;
    }
  return out;
}

double gw_weight(int k, double tau) {
  if (k <= 0) return 0.0;
  return std::exp(tau) * (1.0 - std::pow(1.0 - std::exp(-tau), k));
}

SummaryStats summary_stats(const Graph& g, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("decay parameter tau must be positive");
  const auto counts = count_shared_partners(g);
  SummaryStats s;
  s.edges = static_cast<double>(g.n_edges());
  for (std::size_t k = 1; k < counts.connected.size(); ++k) {
    const double w = gw_weight(static_cast<int>(k), tau);
    s.gwesp += w * static_cast<double>(counts.connected[k]);
    s.gwnsp += w * static_cast<double>(counts.unconnected[k]);
  }
  return s;
}

Eigen::Vector3d change_stats(const Graph& g, int i, int j, double tau) {
  if (i == j) throw InvalidArgument("change statistic needs two distinct nodes");
  const bool on = g.has_edge(i, j);
  // Shared-partner counts are read as if (i, j) were absent.
  const int off_correction = on ? 1 : 0;
  double d_esp = 0.0;
  double d_nsp = 0.0;

  const double w_ij = gw_weight(g.shared_partners(i, j), tau);
  d_esp += w_ij;
  d_nsp -= w_ij;

  auto bump = [&](int a, int k) {
    // Dyad (a, k) gains one shared partner when (i, j) is switched on.
    const int s_off = g.shared_partners(a, k) - off_correction;
    const double dw = gw_weight(s_off + 1, tau) - gw_weight(s_off, tau);
    (g.has_edge(a, k) ? d_esp : d_nsp) += dw;
  };
  g.for_each_neighbour(i, [&](int k) {
    if (k != j) bump(j, k);
  });
  g.for_each_neighbour(j, [&](int k) {
    if (k != i) bump(i, k);
  });
  return {1.0, d_esp, d_nsp};
}

}  // namespace ahsnpe
