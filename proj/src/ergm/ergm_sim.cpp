#include <cassert>
#include <cmath>

#include "ahsnpe/ergm.hpp"
#include "ahsnpe/parallel.hpp"

namespace ahsnpe {

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::kEdges: return "edges";
    case Statistic::kGwesp: return "gwesp";
    case Statistic::kGwnsp: return "gwnsp";
  }
  return "?";
}

Statistic statistic_from_string(const std::string& name) {
  if (name == "edges") return Statistic::kEdges;
  if (name == "gwesp") return Statistic::kGwesp;
  if (name == "gwnsp") return Statistic::kGwnsp;
  throw InvalidArgument("unknown statistic '" + name + "'");
}

Vector ErgmModel::project(const SummaryStats& s) const { return project(Eigen::Vector3d(s.edges, s.gwesp, s.gwnsp)); }

Vector ErgmModel::project(const Eigen::Vector3d& full) const {
  Vector out(dim());
  for (int k = 0; k < dim(); ++k) out[k] = full[static_cast<int>(terms[static_cast<std::size_t>(k)])];
  return out;
}

Eigen::Vector3d ErgmModel::expand(const Vector& theta) const {
  if (theta.size() != dim()) throw InvalidArgument("parameter dimension does not match the model terms");
  if (!theta.allFinite()) throw InvalidArgument("ERGM parameters must be finite");
  Eigen::Vector3d full = Eigen::Vector3d::Zero();
  for (int k = 0; k < dim(); ++k) full[static_cast<int>(terms[static_cast<std::size_t>(k)])] = theta[k];
  return full;
}

std::vector<std::string> ErgmModel::names() const {
  std::vector<std::string> out;
  for (auto t : terms) out.push_back(to_string(t));
  return out;
}

std::int64_t SimConfig::resolved_burn_in(int n_nodes) const {
  const std::int64_t dyads = static_cast<std::int64_t>(n_nodes) * (n_nodes - 1) / 2;
  return burn_in >= 0 ? burn_in : 20 * dyads;
}

std::int64_t SimConfig::resolved_thin(int n_nodes) const {
  const std::int64_t dyads = static_cast<std::int64_t>(n_nodes) * (n_nodes - 1) / 2;
  return thin >= 1 ? thin : 5 * dyads;
}

void SimConfig::validate() const {
  if (thin == 0) throw InvalidArgument("thin must be at least 1");
}

ErgmChain::ErgmChain(Graph start, const ErgmModel& model, Vector theta, DyadProposal proposal)
    : g_(std::move(start)), theta_full_(model.expand(theta)), decay_(model.decay), proposal_(proposal) {
  const int n = g_.n_nodes();
  edge_pos_.assign(static_cast<std::size_t>(n) * n, -1);
  for (const auto& e : g_.edge_list()) {
    edge_pos_[static_cast<std::size_t>(e.first) * n + e.second] = static_cast<int>(edges_.size());
    edges_.push_back(e);
  }
}

Dyad ErgmChain::uniform_dyad(Rng& rng) const {
  const int n = g_.n_nodes();
  std::uniform_int_distribution<int> first(0, n - 1);
  std::uniform_int_distribution<int> second(0, n - 2);
  int i = first(rng);
  int j = second(rng);
  if (j >= i) ++j;
  return {std::min(i, j), std::max(i, j)};
}

void ErgmChain::apply_toggle(int i, int j) {
  const int n = g_.n_nodes();
  const std::size_t key = static_cast<std::size_t>(i) * n + j;
  if (g_.has_edge(i, j)) {
    const int pos = edge_pos_[key];
    const Dyad last = edges_.back();
    edges_[static_cast<std::size_t>(pos)] = last;
    edge_pos_[static_cast<std::size_t>(last.first) * n + last.second] = pos;
    edges_.pop_back();
    edge_pos_[key] = -1;
  } else {
    edge_pos_[key] = static_cast<int>(edges_.size());
    edges_.emplace_back(i, j);
  }
  g_.toggle(i, j);
}

bool ErgmChain::step(Rng& rng) {
  const std::int64_t dyads = g_.n_dyads();
  if (dyads == 0) return false;
  ++proposed_;
  const std::int64_t e = g_.n_edges();
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Dyad d;
  double log_q_ratio = 0.0;
  if (proposal_ == DyadProposal::kUniformDyad) {
    d = uniform_dyad(rng);
  } else {
    bool remove = false;
    if (e == 0) remove = false;
    else if (e == dyads) remove = true;
    else remove = unif(rng) < 0.5;
    double p_forward = 0.0;
    double p_reverse = 0.0;
    if (remove) {
      std::uniform_int_distribution<std::int64_t> pick(0, e - 1);
      d = edges_[static_cast<std::size_t>(pick(rng))];
      p_forward = (e == dyads ? 1.0 : 0.5) / static_cast<double>(e);
      const std::int64_t e_after = e - 1;
      p_reverse = (e_after == 0 ? 1.0 : 0.5) / static_cast<double>(dyads - e_after);
    } else {
      do {
        d = uniform_dyad(rng);
      } while (g_.has_edge(d.first, d.second));
      p_forward = (e == 0 ? 1.0 : 0.5) / static_cast<double>(dyads - e);
      const std::int64_t e_after = e + 1;
      p_reverse = (e_after == dyads ? 1.0 : 0.5) / static_cast<double>(e_after);
    }
    log_q_ratio = std::log(p_reverse) - std::log(p_forward);
  }

  const bool adding = !g_.has_edge(d.first, d.second);
  double log_ratio = 0.0;
  if (theta_full_[1] == 0.0 && theta_full_[2] == 0.0) {
    log_ratio = theta_full_[0];
  } else {
    log_ratio = theta_full_.dot(change_stats(g_, d.first, d.second, decay_));
  }
  if (!adding) log_ratio = -log_ratio;
  log_ratio += log_q_ratio;

  if (log_ratio >= 0.0 || std::log(unif(rng)) < log_ratio) {
    apply_toggle(d.first, d.second);
    ++accepted_;
    return true;
  }
  return false;
}

void ErgmChain::run(std::int64_t steps, Rng& rng) {
  for (std::int64_t s = 0; s < steps; ++s) step(rng);
}

Graph mh_step(const Graph& g, const ErgmModel& model, const Vector& theta, DyadProposal proposal, Rng& rng) {
  ErgmChain chain(g, model, theta, proposal);
  chain.step(rng);
  return chain.graph();
}

Graph simulate_with(const ErgmModel& model, const Vector& theta, int n_nodes, const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  ErgmChain chain(Graph(n_nodes), model, theta, cfg.proposal);
  chain.run(cfg.resolved_burn_in(n_nodes) + cfg.resolved_thin(n_nodes), rng);
  assert(chain.graph().check_invariants());
  return chain.graph();
}

Graph simulate(const ErgmModel& model, const Vector& theta, int n_nodes, const SimConfig& cfg) {
  Rng rng(cfg.seed);
  return simulate_with(model, theta, n_nodes, cfg, rng);
}

std::vector<SummaryStats> simulate_stats_batch(const ErgmModel& model, const Matrix& thetas, int n_nodes,
                                               const SimConfig& cfg, unsigned threads,
                                               std::span<const std::uint64_t> stream_ids) {
  if (thetas.cols() != model.dim()) throw InvalidArgument("parameter matrix width does not match the model");
  if (!stream_ids.empty() && static_cast<Eigen::Index>(stream_ids.size()) != thetas.rows())
    throw InvalidArgument("stream id count does not match the batch");
  std::vector<SummaryStats> out(static_cast<std::size_t>(thetas.rows()));
  parallel_for(out.size(), threads, [&](std::size_t b) {
    const std::uint64_t id = stream_ids.empty() ? b : stream_ids[b];
    Rng rng = make_rng(cfg.seed, id);
    const Vector theta = thetas.row(static_cast<Eigen::Index>(b)).transpose();
    out[b] = summary_stats(simulate_with(model, theta, n_nodes, cfg, rng), model.decay);
  });
  return out;
}

}  // namespace ahsnpe
