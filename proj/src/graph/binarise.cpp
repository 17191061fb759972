#include "ahsnpe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ahsnpe {

namespace {

constexpr double kSymmetryTolerance = 1e-9;

struct Entry {
  double magnitude;
  std::size_t order;  // position in (matrix, row-major) enumeration
  int matrix;
  int i;
  int j;
};

std::int64_t edges_for_degree(std::int64_t nodes, double target_avg_degree) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(nodes) * target_avg_degree / 2.0));
}

void select_top(std::vector<Entry>& entries, std::int64_t k) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.order < b.order;
  });
  entries.resize(static_cast<std::size_t>(std::min<std::int64_t>(k, static_cast<std::int64_t>(entries.size()))));
}

}  // namespace

WeightedMatrix::WeightedMatrix(Matrix weights) : w_(std::move(weights)) {
  if (w_.rows() != w_.cols() || w_.rows() < 2) throw InvalidArgument("weight matrix must be square with n >= 2");
  for (Eigen::Index i = 0; i < w_.rows(); ++i)
    for (Eigen::Index j = 0; j < w_.cols(); ++j) {
      if (i == j) continue;
      if (!std::isfinite(w_(i, j))) throw InvalidArgument("weight matrix has non-finite entries");
      if (std::abs(w_(i, j) - w_(j, i)) > kSymmetryTolerance)
        throw InvalidArgument("weight matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

Graph binarise(const WeightedMatrix& w, double target_avg_degree) {
  const WeightedMatrix group[] = {w};
  return binarise_group(group, target_avg_degree).front();
}

std::vector<Graph> binarise_group(std::span<const WeightedMatrix> group, double target_avg_degree) {
  if (group.empty()) throw InvalidArgument("empty group");
  const int n = group.front().n_nodes();
  if (!(target_avg_degree > 0.0 && target_avg_degree < n - 1))
    throw InvalidArgument("target average degree must lie in (0, n-1)");
  std::vector<Entry> entries;
  entries.reserve(group.size() * static_cast<std::size_t>(n) * (n - 1) / 2);
  std::size_t order = 0;
  for (std::size_t m = 0; m < group.size(); ++m) {
    if (group[m].n_nodes() != n) throw InvalidArgument("group matrices must share the node count");
    const Matrix& w = group[m].weights();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        entries.push_back({std::abs(w(i, j)), order++, static_cast<int>(m), i, j});
  }
  const std::int64_t k = edges_for_degree(static_cast<std::int64_t>(group.size()) * n, target_avg_degree);
  select_top(entries, k);
  std::vector<Graph> out(group.size(), Graph(n));
  for (const auto& e : entries) out[static_cast<std::size_t>(e.matrix)].toggle(e.i, e.j);
  return out;
}

}  // namespace ahsnpe
