// Command-line front end: simulation, reference MCMC fits, the hierarchical
// neural fit, diagnostics and reports.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ahsnpe/config.hpp"
#include "ahsnpe/csv.hpp"
#include "ahsnpe/diagnostics.hpp"
#include "ahsnpe/driver.hpp"
#include "ahsnpe/refbayes.hpp"

namespace fs = std::filesystem;
using namespace ahsnpe;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string config;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Settings settings_for(const Globals& g) { return g.config.empty() ? Settings{} : load_settings(g.config); }

json manifest(const std::string& command, const Globals& g, const Settings& s) {
  const json cfg = settings_to_json(s);
  return {{"tool", "ahsnpe"},
          {"version", AHSNPE_VERSION},
          {"command", command},
          {"seed", g.seed},
          {"threads", g.threads},
          {"config_file", g.config},
          {"config_hash", hex(fnv1a(cfg.dump()))},
          {"config", cfg}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<std::string> column_names(const ErgmModel& m) { return m.names(); }

/// Regular files of a directory in name order.
std::vector<fs::path> list_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InvalidArgument("no network files in " + dir.string());
  return out;
}

bool is_binary(const Matrix& m) { return ((m.array() == 0.0) || (m.array() == 1.0)).all(); }

/// Edge lists and 0/1 matrices are used as they are; weighted matrices are
/// thresholded together to the configured mean degree.
std::vector<Graph> load_networks(const fs::path& dir, double target_degree) {
  const auto files = list_files(dir);
  std::vector<NetworkFile> raw;
  for (const auto& f : files) raw.push_back(read_network_file(f));
  std::vector<WeightedMatrix> weighted;
  for (const auto& r : raw)
    if (!r.is_edge_list && !is_binary(r.dense)) weighted.emplace_back(r.dense);
  const auto thresholded = weighted.empty() ? std::vector<Graph>{} : binarise_group(weighted, target_degree);
  std::vector<Graph> out;
  std::size_t w = 0;
  for (const auto& r : raw) {
    if (r.is_edge_list)
      out.push_back(r.graph);
    else if (is_binary(r.dense))
      out.push_back(graph_from_dense(r.dense));
    else
      out.push_back(thresholded[w++]);
  }
  return out;
}

Matrix observed_stats(const std::vector<Graph>& graphs, const ErgmModel& model) {
  Matrix obs(static_cast<Eigen::Index>(graphs.size()), model.dim());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    obs.row(static_cast<Eigen::Index>(i)) = model.project(summary_stats(graphs[i], model.decay)).transpose();
  return obs;
}

json summary_json(const std::vector<std::string>& names, const Matrix& samples) {
  const auto s = summarize(samples);
  json out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    json q;
    for (std::size_t l = 0; l < kSummaryLevels.size(); ++l)
      q[format_double(100.0 * kSummaryLevels[l]) + "%"] = s.quantiles(static_cast<Eigen::Index>(l), c);
    out[names[k]] = {{"mean", s.mean[c]}, {"sd", std::sqrt(s.cov(c, c))}, {"quantiles", q}};
  }
  out["n_samples"] = s.n_samples;
  return out;
}

std::vector<RoundRecord> read_history(const fs::path& dir) {
  std::vector<RoundRecord> history;
  for (int t = 1; fs::exists(dir / ("round_" + std::to_string(t) + ".json")); ++t)
    history.push_back(round_from_json(read_json(dir / ("round_" + std::to_string(t) + ".json"))));
  if (history.empty()) throw InvalidArgument("nothing to report: no round logs in " + dir.string());
  return history;
}

std::optional<Matrix> read_reference(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_csv(path).values;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals& g, const std::string& theta_text, int nodes, int draws, const std::string& out,
                 const std::string& graphs_out) {
  const Settings s = settings_for(g);
  const Vector theta = [&] {
    const auto v = parse_double_list(theta_text);
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }();
  if (theta.size() != s.model.dim())
    throw InvalidArgument("--theta needs " + std::to_string(s.model.dim()) + " values for the configured terms");
  if (draws < 1) throw InvalidArgument("--draws must be positive");
  SimConfig sim = s.sim;
  sim.seed = g.seed;
  const Matrix thetas = theta.transpose().replicate(draws, 1);
  const auto start = Clock::now();
  Matrix stats(draws, 3);
  if (graphs_out.empty()) {
    const auto batch = simulate_stats_batch(s.model, thetas, nodes, sim, g.threads);
    for (int b = 0; b < draws; ++b) stats.row(b) = batch[static_cast<std::size_t>(b)].as_vector().transpose();
  } else {
    fs::create_directories(graphs_out);
    for (int b = 0; b < draws; ++b) {
      Rng rng = make_rng(sim.seed, static_cast<std::uint64_t>(b));
      const Graph graph = simulate_with(s.model, theta, nodes, sim, rng);
      stats.row(b) = summary_stats(graph, s.model.decay).as_vector().transpose();
      char name[32];
      std::snprintf(name, sizeof name, "graph_%04d.txt", b);
      write_edge_list(fs::path(graphs_out) / name, graph);
    }
  }
  write_csv(out, {"edges", "gwesp", "gwnsp"}, stats);
  std::cerr << "simulated " << draws << " networks in " << seconds_since(start) << " s\n";
  return 0;
}

int cmd_fit_exchange(const Globals& g, const std::string& network, const std::string& out) {
  const Settings s = settings_for(g);
  const auto file = read_network_file(network);
  const Graph graph = file.is_edge_list ? file.graph
                      : is_binary(file.dense) ? graph_from_dense(file.dense)
                                              : binarise(WeightedMatrix(file.dense), s.target_degree);
  const int d = s.model.dim();
  const Vector mean = s.exchange_prior_mean.size() ? s.exchange_prior_mean : Vector::Zero(d);
  const Matrix cov = s.exchange_prior_cov.size() ? s.exchange_prior_cov : Matrix(10.0 * Matrix::Identity(d, d));
  ExchangeConfig cfg = s.exchange;
  cfg.aux_sim = s.sim;
  cfg.seed = g.seed;
  fs::create_directories(out);
  const auto start = Clock::now();
  const auto chain = exchange_fit(graph, s.model, mean, cov, cfg);
  write_csv(fs::path(out) / "posterior_samples.csv", column_names(s.model), chain.draws);
  write_json(fs::path(out) / "posterior_summary.json", summary_json(column_names(s.model), chain.draws));
  json m = manifest("fit-exchange", g, s);
  m["network"] = network;
  m["acceptance_rate"] = chain.acceptance_rate;
  m["stage_seconds"] = {{"sampling", seconds_since(start)}};
  write_json(fs::path(out) / "manifest.json", m);
  std::cerr << "acceptance " << chain.acceptance_rate << ", " << chain.draws.rows() << " draws\n";
  return 0;
}

int cmd_fit_hier_bayes(const Globals& g, const std::string& data, const std::string& out) {
  const Settings s = settings_for(g);
  const auto graphs = load_networks(data, s.target_degree);
  HierGibbsConfig cfg = s.hier;
  cfg.aux_sim = s.sim;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  fs::create_directories(out);
  const auto start = Clock::now();
  const auto chain = hier_gibbs_fit(graphs, s.model, s.resolved_niw(), cfg);
  const auto names = column_names(s.model);
  write_csv(fs::path(out) / "theta_g_samples.csv", names, chain.theta_g);
  std::vector<std::string> sigma_names;
  for (const auto& c : names)
    for (const auto& r : names) sigma_names.push_back("sigma_g_" + r + "_" + c);
  write_csv(fs::path(out) / "sigma_g_samples.csv", sigma_names, chain.sigma_g);
  Matrix local_means(static_cast<Eigen::Index>(graphs.size()), s.model.dim());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    local_means.row(static_cast<Eigen::Index>(i)) = sample_mean(chain.local[i]).transpose();
  write_csv(fs::path(out) / "local_means.csv", names, local_means);
  json m = manifest("fit-hier-bayes", g, s);
  m["data"] = data;
  m["n_networks"] = graphs.size();
  m["stage_seconds"] = {{"sampling", seconds_since(start)}};
  write_json(fs::path(out) / "manifest.json", m);
  return 0;
}

int cmd_fit_ahsnpe(const Globals& g, const std::string& data, const std::string& out) {
  const Settings s = settings_for(g);
  const auto graphs = load_networks(data, s.target_degree);
  const Matrix obs = observed_stats(graphs, s.model);
  const auto names = column_names(s.model);
  fs::create_directories(out);
  write_csv(fs::path(out) / "observations.csv", names, obs);

  RunConfig cfg;
  cfg.schedule = s.schedule;
  cfg.train = s.train;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  cfg.out_dir = out;
  const auto simulator = ergm_simulator(s.model, graphs.front().n_nodes(), s.sim, g.threads);
  for (const auto& gr : graphs)
    if (gr.n_nodes() != graphs.front().n_nodes()) throw InvalidArgument("all networks must have the same node count");
  const auto start = Clock::now();
  const auto res = run(obs, s.resolved_niw(), simulator, cfg);

  // Final posterior draws, per observation and for the group level.
  const auto report_start = Clock::now();
  const Eigen::Index draws = s.schedule.final_samples;
  Matrix local_means(obs.rows(), s.model.dim());
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    Rng rng = make_rng(derive_seed(g.seed, 0x504f5354), static_cast<std::uint64_t>(i));
    const Matrix samples = res.estimator.sample(obs.row(i).transpose(), draws, rng);
    local_means.row(i) = sample_mean(samples).transpose();
    write_csv(fs::path(out) / ("local_posterior_" + std::to_string(i) + ".csv"), names, samples);
  }
  const int d = s.model.dim();
  Matrix group(draws, d + d * d);
  Rng rng = make_rng(g.seed, 0x47525550);
  for (Eigen::Index k = 0; k < draws; ++k) {
    const auto nd = sample_niw(res.posterior, rng);
    group.row(k).head(d) = nd.mean.transpose();
    group.row(k).tail(d * d) = Eigen::Map<const RowVector>(nd.cov.data(), d * d);
  }
  if (!res.estimator.checkpoint.is_null()) write_json(fs::path(out) / "final_estimator.json", res.estimator.checkpoint);

  ReportInput report;
  report.history = res.history;
  report.parameter_names = names;
  report.group_samples = group;
  report.local_means = local_means;
  emit_reports(report, out);

  json m = manifest("fit-ahsnpe", g, s);
  m["data"] = data;
  m["n_networks"] = graphs.size();
  m["converged"] = res.converged;
  m["rounds"] = res.history.size();
  m["selected_round"] = res.selected_round;
  m["total_simulations"] = res.total_simulations;
  StageTimes total;
  for (const auto& r : res.history) {
    total.simulation += r.times.simulation;
    total.training += r.times.training;
    total.inference += r.times.inference;
  }
  m["stage_seconds"] = {{"simulation", total.simulation},
                        {"training", total.training},
                        {"inference", total.inference},
                        {"final_sampling", seconds_since(report_start)},
                        {"wall", seconds_since(start)}};
  write_json(fs::path(out) / "manifest.json", m);
  std::cerr << (res.converged ? "converged" : "did not converge") << " after " << res.history.size()
            << " rounds; theta_g = " << res.theta_g.transpose() << '\n';
  return 0;
}

int cmd_diagnose(const Globals& g, const std::string& results, const std::string& data, int draws,
                 const std::string& reference) {
  const Settings s = settings_for(g);
  const auto graphs = load_networks(data, s.target_degree);
  const Matrix obs = observed_stats(graphs, s.model);
  const auto est = ConditionalDensityEstimator::from_json(read_json(fs::path(results) / "final_estimator.json"));
  const auto simulator = ergm_simulator(s.model, graphs.front().n_nodes(), s.sim, g.threads);
  std::vector<PpcResult> ppc;
  int flagged = 0;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    Rng rng = make_rng(g.seed, static_cast<std::uint64_t>(i));
    const Matrix theta = est.sample(obs.row(i).transpose(), draws, rng);
    ppc.push_back(posterior_predictive(obs.row(i).transpose(), theta, simulator,
                                       derive_seed(g.seed, 0x10000 + static_cast<std::uint64_t>(i))));
    if (ppc.back().z_available && (ppc.back().z.array().abs() >= 3.0).any()) ++flagged;
  }
  ReportInput report;
  report.history = read_history(results);
  report.parameter_names = column_names(s.model);
  report.local_means = report.history.back().local_means;
  report.ppc = std::move(ppc);
  report.reference_samples = read_reference(reference);
  const auto dir = fs::path(results) / "diagnostics";
  emit_reports(report, dir);
  json m = manifest("diagnose", g, s);
  m["results"] = results;
  m["ppc_draws"] = draws;
  m["observations_with_abs_z_ge_3"] = flagged;
  if (report.reference_samples)
    m["final_mahalanobis_reference"] = mahalanobis(report.history.back().theta_g, *report.reference_samples);
  write_json(dir / "manifest.json", m);
  std::cerr << flagged << " of " << obs.rows() << " observations have a statistic with |z| >= 3\n";
  return 0;
}

int cmd_report(const Globals& g, const std::string& results, const std::string& out, const std::string& reference) {
  const Settings s = settings_for(g);
  ReportInput report;
  report.history = read_history(results);
  report.parameter_names = column_names(s.model);
  report.local_means = report.history.back().local_means;
  report.reference_samples = read_reference(reference);
  const auto files = emit_reports(report, out.empty() ? fs::path(results) / "report" : fs::path(out));
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical neural posterior estimation for multiple ERGM networks"};
  app.set_version_flag("--version", std::string(AHSNPE_VERSION));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->envname("AHSNPE_SEED");
  app.add_option("--threads", g.threads, "Worker threads")->envname("AHSNPE_THREADS")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "JSON settings file")->envname("AHSNPE_CONFIG")->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "Draw networks from an ERGM and write their statistics");
  std::string theta, sim_out = "stats.csv", graphs_out;
  int nodes = 10, draws = 100;
  sim->add_option("--theta", theta, "Comma-separated parameters, one per model term")->required();
  sim->add_option("--nodes", nodes, "Nodes per network")->check(CLI::Range(2, 100000));
  sim->add_option("--draws", draws, "Number of networks");
  sim->add_option("--out", sim_out, "Statistics CSV");
  sim->add_option("--graphs-out", graphs_out, "Also write each network as an edge list here");

  auto* ex = app.add_subcommand("fit-exchange", "Single-network posterior by the exchange algorithm");
  std::string network, ex_out = "exchange";
  ex->add_option("--network", network, "Network file")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", ex_out, "Output directory");

  auto* hb = app.add_subcommand("fit-hier-bayes", "Hierarchical MCMC reference fit over a group of networks");
  std::string hb_data, hb_out = "hier_bayes";
  hb->add_option("--data", hb_data, "Directory of network files")->required();
  hb->add_option("--out", hb_out, "Output directory");

  auto* fit = app.add_subcommand("fit-ahsnpe", "Hierarchical neural fit; resumes if --out holds a partial run");
  std::string fit_data, fit_out = "results";
  fit->add_option("--data", fit_data, "Directory of network files")->required();
  fit->add_option("--out", fit_out, "Output directory");

  auto* diag = app.add_subcommand("diagnose", "Posterior predictive checks for a finished fit");
  std::string diag_results, diag_data, diag_ref;
  int ppc_draws = 500;
  diag->add_option("--results", diag_results, "Output directory of fit-ahsnpe")->required();
  diag->add_option("--data", diag_data, "Directory of network files")->required();
  diag->add_option("--draws", ppc_draws, "Posterior draws per observation")->check(CLI::PositiveNumber);
  diag->add_option("--reference", diag_ref, "CSV of reference group-mean samples")->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "Tables and plots from the round logs of a fit");
  std::string rep_results, rep_out, rep_ref;
  rep->add_option("--results", rep_results, "Output directory of fit-ahsnpe")->required();
  rep->add_option("--out", rep_out, "Report directory (default <results>/report)");
  rep->add_option("--reference", rep_ref, "CSV of reference group-mean samples")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(g, theta, nodes, draws, sim_out, graphs_out);
    if (*ex) return cmd_fit_exchange(g, network, ex_out);
    if (*hb) return cmd_fit_hier_bayes(g, hb_data, hb_out);
    if (*fit) return cmd_fit_ahsnpe(g, fit_data, fit_out);
    if (*diag) return cmd_diagnose(g, diag_results, diag_data, ppc_draws, diag_ref);
    if (*rep) return cmd_report(g, rep_results, rep_out, rep_ref);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
