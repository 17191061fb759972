#include <fstream>
#include <sstream>
#include <string>

#include "ahsnpe/graph.hpp"

namespace ahsnpe {

namespace {

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

NetworkFile read_network_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file " + path.string());
  std::string line;
  while (std::getline(in, line) && blank(line)) {
  }
  if (blank(line)) throw InvalidArgument("network file " + path.string() + " is empty");

  NetworkFile out;
  const auto first = line.find_first_not_of(" \t");
  if (line.compare(first, 2, "n=") == 0) {
    out.is_edge_list = true;
    const int n = std::stoi(line.substr(first + 2));
    std::vector<Dyad> edges;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (blank(line)) continue;
      std::istringstream row(line);
      int i = -1;
      int j = -1;
      if (!(row >> i >> j)) throw InvalidArgument(path.string() + ":" + std::to_string(lineno) + ": expected 'i j'");
      edges.emplace_back(std::min(i, j), std::max(i, j));
    }
    out.graph = Graph::from_edges(n, edges);
    return out;
  }

  std::vector<std::vector<double>> rows;
  do {
    if (blank(line)) continue;
    std::istringstream row(line);
    std::vector<double> values;
    double v = 0.0;
    while (row >> v) values.push_back(v);
    if (!row.eof()) throw InvalidArgument(path.string() + ": non-numeric entry in dense matrix");
    rows.push_back(std::move(values));
  } while (std::getline(in, line));
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.dense.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw InvalidArgument(path.string() + ": dense matrix is not square");
    for (Eigen::Index j = 0; j < n; ++j) out.dense(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

Graph graph_from_dense(const Matrix& dense) {
  const WeightedMatrix checked(dense);
  const int n = checked.n_nodes();
  Graph g(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (dense(i, j) != 0.0) g.toggle(i, j);
  return g;
}

void write_edge_list(const std::filesystem::path& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "n=" << g.n_nodes() << '\n';
  for (const auto& [i, j] : g.edge_list()) out << i << ' ' << j << '\n';
}

}  // namespace ahsnpe
