#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "ahsnpe/core.hpp"

namespace ahsnpe {

using Dyad = std::pair<int, int>;

/// Undirected simple graph. Adjacency is held as one bitset row per node, and
/// the number of shared partners of every dyad is kept in a dense table that
/// is updated incrementally on each toggle.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n_nodes);

  static Graph from_edges(int n_nodes, std::span<const Dyad> edges);

  int n_nodes() const { return n_; }
  std::int64_t n_edges() const { return n_edges_; }
  std::int64_t n_dyads() const { return static_cast<std::int64_t>(n_) * (n_ - 1) / 2; }

  bool has_edge(int i, int j) const;
  int degree(int i) const;
  int shared_partners(int i, int j) const { return sp_[index(i, j)]; }

  /// Flips dyad (i, j). Self-loops are rejected.
  void toggle(int i, int j);
  void add_edge(int i, int j) {
    if (!has_edge(i, j)) toggle(i, j);
  }
  void remove_edge(int i, int j) {
    if (has_edge(i, j)) toggle(i, j);
  }

  /// Calls f(k) for each neighbour k of i in increasing order.
  template <class F>
  void for_each_neighbour(int i, F&& f) const {
    const std::uint64_t* row = bits_.data() + static_cast<std::size_t>(i) * words_;
    for (int w = 0; w < words_; ++w) {
      std::uint64_t word = row[w];
      while (word) {
        const int b = __builtin_ctzll(word);
        f(w * 64 + b);
        word &= word - 1;
      }
    }
  }

  /// Edges (i < j) in row-major order.
  std::vector<Dyad> edge_list() const;

  /// Returns the graph obtained by applying a node relabeling `perm[old] = new`.
  Graph relabeled(std::span<const int> perm) const;

  bool operator==(const Graph& other) const { return n_ == other.n_ && bits_ == other.bits_; }

  /// Structural self-check: symmetry, no self-loops, edge count and cached
  /// shared-partner counts consistent with the adjacency bits.
  bool check_invariants() const;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
  void check_node(int i) const;
  void flip_bit(int i, int j);
  bool bit(int i, int j) const {
    return (bits_[static_cast<std::size_t>(i) * words_ + (j >> 6)] >> (j & 63)) & 1ULL;
  }

  int n_ = 0;
  int words_ = 0;
  std::int64_t n_edges_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<int> sp_;
};

inline constexpr double kDefaultDecay = 0.75;

/// Edges, GWESP and GWNSP of a network.
struct SummaryStats {
  double edges = 0.0;
  double gwesp = 0.0;
  double gwnsp = 0.0;

  std::array<double, 3> as_array() const { return {edges, gwesp, gwnsp}; }
  Vector as_vector() const { return Eigen::Vector3d(edges, gwesp, gwnsp); }
};

/// Histograms of shared-partner counts. Entry k (1 <= k <= n-2) counts the
/// connected (resp. non-connected) dyads whose endpoints have exactly k common
/// neighbours; entry 0 is not tracked and always holds 0.
struct SharedPartnerCounts {
  std::vector<std::int64_t> connected;
  std::vector<std::int64_t> unconnected;
};

SharedPartnerCounts count_shared_partners(const Graph& g);

/// Weight of a dyad with k shared partners: exp(tau) * (1 - (1 - exp(-tau))^k).
double gw_weight(int k, double tau);

SummaryStats summary_stats(const Graph& g, double tau = kDefaultDecay);

/// h(g with (i,j) present) - h(g with (i,j) absent), evaluated from local
/// neighbourhoods only.
Eigen::Vector3d change_stats(const Graph& g, int i, int j, double tau = kDefaultDecay);

/// Dense symmetric weight matrix; the diagonal is ignored.
class WeightedMatrix {
 public:
  explicit WeightedMatrix(Matrix weights);
  int n_nodes() const { return static_cast<int>(w_.rows()); }
  const Matrix& weights() const { return w_; }

 private:
  Matrix w_;
};

/// Keeps the round(n * target_avg_degree / 2) largest |w_ij| (i < j) as edges.
/// Ties are broken by row-major position.
Graph binarise(const WeightedMatrix& w, double target_avg_degree);

/// Group thresholding: all upper-triangle |weights| of the group are pooled and
/// one absolute threshold keeps round(m * n * target_avg_degree / 2) entries
/// overall. Ties are broken by (matrix index, row-major position).
std::vector<Graph> binarise_group(std::span<const WeightedMatrix> group, double target_avg_degree);

/// Contents of a network file: either an edge list or a dense matrix.
struct NetworkFile {
  bool is_edge_list = false;
  Graph graph;            // set for edge lists
  Matrix dense;           // set for dense matrices
};

/// Reads a network file. A first line of the form "n=<N>" marks an edge list
/// ("i j" per line, 0-indexed); anything else is a whitespace-separated dense
/// matrix with one row per line.
NetworkFile read_network_file(const std::filesystem::path& path);

/// Dense input interpreted as adjacency: any non-zero off-diagonal entry is an edge.
Graph graph_from_dense(const Matrix& dense);

void write_edge_list(const std::filesystem::path& path, const Graph& g);

}  // namespace ahsnpe
