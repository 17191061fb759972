#include "ahsnpe/graph.hpp"

#include <string>

namespace ahsnpe {

Graph::Graph(int n_nodes) : n_(n_nodes) {
  if (n_nodes < 1) throw InvalidArgument("graph needs at least one node");
  words_ = (n_ + 63) / 64;
  bits_.assign(static_cast<std::size_t>(n_) * words_, 0ULL);
  sp_.assign(static_cast<std::size_t>(n_) * n_, 0);
}

Graph Graph::from_edges(int n_nodes, std::span<const Dyad> edges) {
  Graph g(n_nodes);
  for (const auto& [i, j] : edges) {
    if (g.has_edge(i, j)) throw InvalidArgument("duplicate edge " + std::to_string(i) + " " + std::to_string(j));
    g.toggle(i, j);
  }
  return g;
}

void Graph::check_node(int i) const {
  if (i < 0 || i >= n_) throw InvalidArgument("node index " + std::to_string(i) + " out of range");
}

bool Graph::has_edge(int i, int j) const {
  check_node(i);
  check_node(j);
  return i != j && bit(i, j);
}

int Graph::degree(int i) const {
  check_node(i);
  int d = 0;
  const std::uint64_t* row = bits_.data() + static_cast<std::size_t>(i) * words_;
  for (int w = 0; w < words_; ++w) d += __builtin_popcountll(row[w]);
  return d;
}

void Graph::flip_bit(int i, int j) {
  bits_[static_cast<std::size_t>(i) * words_ + (j >> 6)] ^= (1ULL << (j & 63));
}

void Graph::toggle(int i, int j) {
  check_node(i);
  check_node(j);
  if (i == j) throw InvalidArgument("self-loops are not allowed");
  const bool adding = !bit(i, j);
  const int delta = adding ? 1 : -1;
  // i becomes (or stops being) a partner of every dyad (j, k) with k ~ i, and
  // symmetrically j for every dyad (i, k) with k ~ j. Neighbourhoods are read
  // before the flip so that j and i are excluded.
  for_each_neighbour(i, [&](int k) {
    if (k == j) return;
    sp_[index(j, k)] += delta;
    sp_[index(k, j)] += delta;
  });
  for_each_neighbour(j, [&](int k) {
    if (k == i) return;
    sp_[index(i, k)] += delta;
    sp_[index(k, i)] += delta;
  });
  flip_bit(i, j);
  flip_bit(j, i);
  n_edges_ += delta;
}

std::vector<Dyad> Graph::edge_list() const {
  std::vector<Dyad> out;
  out.reserve(static_cast<std::size_t>(n_edges_));
  for (int i = 0; i < n_; ++i)
    for_each_neighbour(i, [&](int k) {
      if (k > i) out.emplace_back(i, k);
    });
  return out;
}

Graph Graph::relabeled(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != n_) throw InvalidArgument("permutation size mismatch");
  Graph out(n_);
  for (const auto& [i, j] : edge_list()) out.toggle(perm[i], perm[j]);
  return out;
}

bool Graph::check_invariants() const {
  std::int64_t edges = 0;
  for (int i = 0; i < n_; ++i) {
    if (bit(i, i)) return false;
    for (int j = 0; j < n_; ++j) {
      if (bit(i, j) != bit(j, i)) return false;
      if (j > i && bit(i, j)) ++edges;
    }
  }
  if (edges != n_edges_) return false;
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      if (i == j) continue;
      int common = 0;
      for (int w = 0; w < words_; ++w)
        common += __builtin_popcountll(bits_[static_cast<std::size_t>(i) * words_ + w] &
                                       bits_[static_cast<std::size_t>(j) * words_ + w]);
      if (common != sp_[index(i, j)]) return false;
    }
  return true;
}

}  // namespace ahsnpe
