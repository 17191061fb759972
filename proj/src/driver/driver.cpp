#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "ahsnpe/driver.hpp"
#include "ahsnpe/parallel.hpp"

namespace ahsnpe {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

constexpr const char* kInitialTag = "initial";
constexpr const char* kRefinedTag = "refined";
constexpr char kDatasetMagic[4] = {'A', 'H', 'S', 'D'};

enum Stream : std::uint64_t { kDraw = 0, kSimulate, kRefinedDraw, kRefinedSimulate, kTrain, kMoments };

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string round_tag(int t) { return "round_" + std::to_string(t); }

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

Vector vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix mat_from(const json& j) {
  if (j.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j.at(0).size()));
  for (std::size_t r = 0; r < j.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vec_from(j.at(r)).transpose();
  return m;
}

json niw_json(const NiwHyper& h) {
  return {{"mu", vec_json(h.mu0)}, {"kappa", h.kappa0}, {"psi", mat_json(h.psi0)}, {"nu", h.nu0}};
}

NiwHyper niw_from(const json& j) {
  return NiwHyper{vec_from(j.at("mu")), j.at("kappa").get<double>(), mat_from(j.at("psi")), j.at("nu").get<double>()};
}

json spec_json(const EstimatorSpec& s) {
  return {{"kind", to_string(s.kind)},         {"hidden_units", s.hidden_units}, {"n_transforms", s.n_transforms},
          {"n_components", s.n_components},    {"theta_dim", s.theta_dim},       {"context_dim", s.context_dim}};
}

EstimatorSpec spec_from(const json& j) {
  return EstimatorSpec{estimator_kind_from_string(j.at("kind").get<std::string>()), j.at("hidden_units").get<int>(),
                       j.at("n_transforms").get<int>(), j.at("n_components").get<int>(),
                       j.at("theta_dim").get<int>(), j.at("context_dim").get<int>()};
}

void write_json(const std::filesystem::path& path, const json& j) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(1) << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

TrainedPosterior posterior_from_checkpoint(const json& checkpoint, const TrainingReport& report) {
  auto est = std::make_shared<const ConditionalDensityEstimator>(ConditionalDensityEstimator::from_json(checkpoint));
  TrainedPosterior out;
  out.sample = [est](const Vector& x, Eigen::Index n, Rng& rng) { return est->sample(x, n, rng); };
  out.checkpoint = checkpoint;
  out.report = report;
  return out;
}

/// Everything needed to continue a run after round `round`.
struct LoopState {
  int round = 0;
  Vector theta_g;
  Matrix sigma_g;
  NiwHyper posterior;
  ProposalMixture proposal;
  TrainingSet dataset;
  std::vector<RoundRecord> history;
  int consecutive = 0;
  std::int64_t total_simulations = 0;
  json estimator;
  bool finished = false;
};

json proposal_json(const ProposalMixture& p) {
  json comps = json::array();
  for (const auto& c : p.components())
    comps.push_back({{"tag", c.round_tag}, {"n_pairs", c.n_pairs}, {"mean", vec_json(c.mean)}, {"cov", mat_json(c.cov)}});
  return comps;
}

ProposalMixture proposal_from(const json& j) {
  ProposalMixture p;
  for (const auto& c : j)
    p = p.add_component(vec_from(c.at("mean")), mat_from(c.at("cov")), c.at("n_pairs").get<std::int64_t>(),
                        c.at("tag").get<std::string>());
  return p;
}

void save_state(const std::filesystem::path& dir, const LoopState& s) {
  s.dataset.save(dir / "dataset.bin");
  json j;
  j["round"] = s.round;
  j["theta_g"] = vec_json(s.theta_g);
  j["sigma_g"] = mat_json(s.sigma_g);
  j["posterior"] = niw_json(s.posterior);
  j["proposal"] = proposal_json(s.proposal);
  j["consecutive"] = s.consecutive;
  j["total_simulations"] = s.total_simulations;
  j["finished"] = s.finished;
  j["dataset_digest"] = s.dataset.digest();
  j["estimator"] = s.estimator;
  j["history"] = json::array();
  for (const auto& r : s.history) j["history"].push_back(to_json(r));
  write_json(dir / "state.json", j);
}

LoopState load_state(const std::filesystem::path& dir) {
  const json j = read_json(dir / "state.json");
  LoopState s;
  s.round = j.at("round").get<int>();
  s.theta_g = vec_from(j.at("theta_g"));
  s.sigma_g = mat_from(j.at("sigma_g"));
  s.posterior = niw_from(j.at("posterior"));
  s.proposal = proposal_from(j.at("proposal"));
  s.consecutive = j.at("consecutive").get<int>();
  s.total_simulations = j.at("total_simulations").get<std::int64_t>();
  s.finished = j.at("finished").get<bool>();
  s.estimator = j.at("estimator");
  for (const auto& r : j.at("history")) s.history.push_back(round_from_json(r));
  s.dataset = TrainingSet::load(dir / "dataset.bin");
  if (s.dataset.digest() != j.at("dataset_digest").get<std::uint64_t>())
    throw InvalidArgument("dataset file does not match the saved run state");
  return s;
}

}  // namespace

void Schedule::validate() const {
  if (t_initial < 2) throw InvalidArgument("t_initial must be at least 2 (the refined component averages rounds 2..t_initial)");
  if (n_initial <= n_round) throw InvalidArgument("n_initial must exceed n_round");
  if (n_round < 1 || n_refined < 1) throw InvalidArgument("pair counts must be positive");
  if (!(cov_inflation > 0.0) || !(initial_cov_scale > 0.0)) throw InvalidArgument("covariance scales must be positive");
  if (max_rounds < 1) throw InvalidArgument("max_rounds must be positive");
  if (!(tolerance > 0.0) || consecutive < 1) throw InvalidArgument("invalid convergence criterion");
  if (moment_samples < 2 || final_samples < 2) throw InvalidArgument("posterior sample counts must be at least 2");
}

Trainer default_trainer() {
  return [](const EstimatorSpec& spec, const Matrix& theta, const Matrix& x, const Gaussian& prior,
            const ProposalMixture& proposal, const TrainConfig& cfg) {
    TrainingReport report;
    const auto est = fit_snpe_atomic(spec, theta, x, prior, proposal, cfg, &report);
    return posterior_from_checkpoint(est.to_json(), report);
  };
}

void TrainingSet::add(const std::string& tag, Matrix theta, Matrix x) {
  if (theta.rows() != x.rows()) throw InvalidArgument("parameter and data row counts differ");
  if (!parts_.empty() && (theta.cols() != parts_.front().theta.cols() || x.cols() != parts_.front().x.cols()))
    throw InvalidArgument("training pair dimensions differ from the existing set");
  for (const auto& p : parts_)
    if (p.tag == tag) throw InvalidArgument("training set already holds tag '" + tag + "'");
  parts_.push_back(Part{tag, std::move(theta), std::move(x)});
}

std::int64_t TrainingSet::remove(const std::string& tag) {
  std::int64_t removed = 0;
  std::erase_if(parts_, [&](const Part& p) {
    if (p.tag != tag) return false;
    removed += p.theta.rows();
    return true;
  });
  if (removed == 0) throw InvalidArgument("training set has no pairs tagged '" + tag + "'");
  return removed;
}

std::int64_t TrainingSet::size() const {
  std::int64_t n = 0;
  for (const auto& p : parts_) n += p.theta.rows();
  return n;
}

std::int64_t TrainingSet::count(const std::string& tag) const {
  std::int64_t n = 0;
  for (const auto& p : parts_)
    if (p.tag == tag) n += p.theta.rows();
  return n;
}

std::vector<std::string> TrainingSet::tags() const {
  std::vector<std::string> out;
  for (const auto& p : parts_) out.push_back(p.tag);
  return out;
}

std::pair<Matrix, Matrix> TrainingSet::assemble() const {
  if (parts_.empty()) return {};
  Matrix theta(size(), parts_.front().theta.cols());
  Matrix x(size(), parts_.front().x.cols());
  Eigen::Index row = 0;
  for (const auto& p : parts_) {
    theta.middleRows(row, p.theta.rows()) = p.theta;
    x.middleRows(row, p.x.rows()) = p.x;
    row += p.theta.rows();
  }
  return {std::move(theta), std::move(x)};
}

std::uint64_t TrainingSet::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : parts_) {
    mix(p.tag.data(), p.tag.size());
    mix(p.theta.data(), static_cast<std::size_t>(p.theta.size()) * sizeof(double));
    mix(p.x.data(), static_cast<std::size_t>(p.x.size()) * sizeof(double));
  }
  return h;
}

void TrainingSet::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    put(static_cast<std::uint64_t>(parts_.size()));
    for (const auto& p : parts_) {
      put(static_cast<std::uint64_t>(p.tag.size()));
      out.write(p.tag.data(), static_cast<std::streamsize>(p.tag.size()));
      put(static_cast<std::int64_t>(p.theta.rows()));
      put(static_cast<std::int64_t>(p.theta.cols()));
      put(static_cast<std::int64_t>(p.x.cols()));
      out.write(reinterpret_cast<const char*>(p.theta.data()), static_cast<std::streamsize>(p.theta.size() * 8));
      out.write(reinterpret_cast<const char*>(p.x.data()), static_cast<std::streamsize>(p.x.size() * 8));
    }
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainingSet TrainingSet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto get = [&](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof(v)); };
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 4, kDatasetMagic)) throw InvalidArgument(path.string() + ": not a dataset file");
  std::uint64_t n_parts = 0;
  get(n_parts);
  TrainingSet set;
  for (std::uint64_t i = 0; i < n_parts && in; ++i) {
    std::uint64_t len = 0;
    get(len);
    std::string tag(len, '\0');
    in.read(tag.data(), static_cast<std::streamsize>(len));
    std::int64_t rows = 0, dt = 0, dx = 0;
    get(rows);
    get(dt);
    get(dx);
    if (rows < 0 || dt < 0 || dx < 0) break;
    Matrix theta(rows, dt), x(rows, dx);
    in.read(reinterpret_cast<char*>(theta.data()), static_cast<std::streamsize>(theta.size() * 8));
    in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(x.size() * 8));
    set.add(tag, std::move(theta), std::move(x));
  }
  if (!in) throw InvalidArgument(path.string() + ": truncated dataset file");
  return set;
}

json to_json(const RoundRecord& r) {
  json j;
  j["round"] = r.round;
  j["theta_g"] = vec_json(r.theta_g);
  j["sigma_g"] = mat_json(r.sigma_g);
  j["niw_posterior"] = niw_json(r.posterior);
  j["relative_change"] = r.relative_change ? json(*r.relative_change) : json(nullptr);
  j["estimator"] = spec_json(r.estimator);
  j["drawn_tag"] = r.drawn_tag;
  j["simulated_pairs"] = r.simulated_pairs;
  j["dataset"] = {{"size", r.dataset_size}, {"digest", r.dataset_digest}, {"by_tag", r.dataset_counts}};
  j["proposal"] = json::array();
  for (const auto& c : r.proposal)
    j["proposal"].push_back(
        {{"tag", c.round_tag}, {"n_pairs", c.n_pairs}, {"mean", vec_json(c.mean)}, {"cov", mat_json(c.cov)}});
  j["swap"] = {{"performed", r.swapped},
               {"removed_pairs", r.removed_pairs},
               {"refined_mean", vec_json(r.refined_mean)},
               {"refined_cov", mat_json(r.refined_cov)}};
  j["stage_seconds"] = {
      {"simulation", r.times.simulation}, {"training", r.times.training}, {"inference", r.times.inference}};
  j["training"] = {{"epochs", r.training.epochs},
                   {"best_epoch", r.training.best_epoch},
                   {"best_val_loss", r.training.best_val_loss},
                   {"train_loss", r.training.train_loss},
                   {"val_loss", r.training.val_loss}};
  j["local_means"] = mat_json(r.local_means);
  return j;
}

RoundRecord round_from_json(const json& j) {
  RoundRecord r;
  r.round = j.at("round").get<int>();
  r.theta_g = vec_from(j.at("theta_g"));
  r.sigma_g = mat_from(j.at("sigma_g"));
  r.posterior = niw_from(j.at("niw_posterior"));
  if (!j.at("relative_change").is_null()) r.relative_change = j.at("relative_change").get<double>();
  r.estimator = spec_from(j.at("estimator"));
  r.drawn_tag = j.at("drawn_tag").get<std::string>();
  r.simulated_pairs = j.at("simulated_pairs").get<std::int64_t>();
  r.dataset_size = j.at("dataset").at("size").get<std::int64_t>();
  r.dataset_digest = j.at("dataset").at("digest").get<std::uint64_t>();
  r.dataset_counts = j.at("dataset").at("by_tag").get<std::map<std::string, std::int64_t>>();
  for (const auto& c : j.at("proposal")) {
    MixtureComponent m;
    m.round_tag = c.at("tag").get<std::string>();
    m.n_pairs = c.at("n_pairs").get<std::int64_t>();
    m.mean = vec_from(c.at("mean"));
    m.cov = mat_from(c.at("cov"));
    r.proposal.push_back(std::move(m));
  }
  const auto& s = j.at("swap");
  r.swapped = s.at("performed").get<bool>();
  r.removed_pairs = s.at("removed_pairs").get<std::int64_t>();
  r.refined_mean = vec_from(s.at("refined_mean"));
  r.refined_cov = mat_from(s.at("refined_cov"));
  const auto& t = j.at("stage_seconds");
  r.times = StageTimes{t.at("simulation").get<double>(), t.at("training").get<double>(), t.at("inference").get<double>()};
  const auto& tr = j.at("training");
  r.training.epochs = tr.at("epochs").get<int>();
  r.training.best_epoch = tr.at("best_epoch").get<int>();
  r.training.best_val_loss = tr.at("best_val_loss").get<double>();
  r.training.train_loss = tr.at("train_loss").get<std::vector<double>>();
  r.training.val_loss = tr.at("val_loss").get<std::vector<double>>();
  r.local_means = mat_from(j.at("local_means"));
  return r;
}

HierResult run(const Matrix& observations, const NiwHyper& niw, const Simulator& simulator, const RunConfig& cfg) {
  const Schedule& sched = cfg.schedule;
  sched.validate();
  cfg.train.validate();
  niw.validate();
  const int d = niw.dim();
  const auto n_obs = static_cast<std::size_t>(observations.rows());
  if (n_obs < 1) throw InvalidArgument("at least one observation is required");
  if (!observations.allFinite()) throw InvalidArgument("observations contain non-finite values");
  const auto m = static_cast<int>(observations.cols());
  const Vector initial_mean = sched.initial_mean.size() ? sched.initial_mean : Vector::Zero(d);
  if (initial_mean.size() != d) throw InvalidArgument("initial proposal mean does not match the hyper-prior");
  const Trainer trainer = cfg.trainer ? cfg.trainer : default_trainer();
  const bool persist = !cfg.out_dir.empty();
  if (persist) std::filesystem::create_directories(cfg.out_dir);

  LoopState s;
  if (persist && std::filesystem::exists(cfg.out_dir / "state.json")) {
    s = load_state(cfg.out_dir);
  } else {
    // Start from the hyper-prior: theta_g = mu0, Sigma_g = Psi0.
    s.theta_g = niw.mu0;
    s.sigma_g = niw.psi0;
    s.posterior = niw;
  }
  TrainedPosterior current;
  if (!s.estimator.is_null() && !cfg.trainer) current = posterior_from_checkpoint(s.estimator, {});

  auto simulate_pairs = [&](const Vector& mean, const Matrix& cov, std::int64_t count, std::uint64_t round_seed,
                            Stream draw, Stream sim) {
    Rng rng = make_rng(round_seed, draw);
    Matrix theta = sample_component(mean, cov, count, rng);
    Matrix x = simulator(theta, derive_seed(round_seed, sim));
    if (x.rows() != theta.rows() || x.cols() != m)
      throw InvalidArgument("simulator output does not match the observations");
    if (!x.allFinite()) throw NumericalError("simulator produced non-finite statistics");
    s.total_simulations += count;
    return std::make_pair(std::move(theta), std::move(x));
  };

  int best_index = -1;
  TrainedPosterior best_estimator;
  double best_change = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& rc = s.history[i].relative_change;
    if (rc && *rc < best_change) {
      best_change = *rc;
      best_index = static_cast<int>(i);
    }
  }

  for (int t = s.round + 1; !s.finished && t <= sched.max_rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    const std::uint64_t round_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));

    auto start = Clock::now();
    Vector comp_mean = s.theta_g;
    Matrix comp_cov = s.sigma_g;
    std::int64_t count = sched.n_round;
    rec.drawn_tag = round_tag(t);
    if (t == 1) {
      comp_mean = initial_mean;
      comp_cov = sched.initial_cov_scale * Matrix::Identity(d, d);
      count = sched.n_initial;
      rec.drawn_tag = kInitialTag;
    }
    auto [theta_new, x_new] = simulate_pairs(comp_mean, comp_cov, count, round_seed, kDraw, kSimulate);
    s.dataset.add(rec.drawn_tag, std::move(theta_new), std::move(x_new));
    s.proposal = s.proposal.add_component(comp_mean, comp_cov, count, rec.drawn_tag);
    rec.simulated_pairs = count;

    if (t == sched.t_initial) {
      rec.swapped = true;
      rec.removed_pairs = s.dataset.remove(kInitialTag);
      s.proposal = s.proposal.remove_component(kInitialTag).first;
      // theta_g^(r) for r = 2..t_initial, i.e. the M-step outputs of rounds
      // 1..t_initial-1.
      rec.refined_mean = Vector::Zero(d);
      rec.refined_cov = Matrix::Zero(d, d);
      for (int r = 0; r < sched.t_initial - 1; ++r) {
        rec.refined_mean += s.history[static_cast<std::size_t>(r)].theta_g;
        rec.refined_cov += s.history[static_cast<std::size_t>(r)].sigma_g;
      }
      rec.refined_mean /= static_cast<double>(sched.t_initial - 1);
      rec.refined_cov *= sched.cov_inflation / static_cast<double>(sched.t_initial - 1);
      auto [theta_ref, x_ref] =
          simulate_pairs(rec.refined_mean, rec.refined_cov, sched.n_refined, round_seed, kRefinedDraw, kRefinedSimulate);
      s.dataset.add(kRefinedTag, std::move(theta_ref), std::move(x_ref));
      s.proposal = s.proposal.add_component(rec.refined_mean, rec.refined_cov, sched.n_refined, kRefinedTag);
      rec.simulated_pairs += sched.n_refined;
    }
    rec.times.simulation = seconds_since(start);
    if (s.proposal.total_pairs() != s.dataset.size())
      throw std::logic_error("proposal pair counts disagree with the training set");

    start = Clock::now();
    rec.estimator = t < sched.t_initial ? sched.burn_in_estimator : sched.main_estimator;
    rec.estimator.theta_dim = d;
    rec.estimator.context_dim = m;
    TrainConfig train = cfg.train;
    train.seed = derive_seed(round_seed, kTrain);
    const Gaussian prior(s.theta_g, s.sigma_g);
    const auto [theta_all, x_all] = s.dataset.assemble();
    current = trainer(rec.estimator, theta_all, x_all, prior, s.proposal, train);
    rec.training = current.report;
    rec.times.training = seconds_since(start);

    start = Clock::now();
    std::vector<MomentPair> moments(n_obs);
    const std::uint64_t moment_seed = derive_seed(round_seed, kMoments);
    parallel_for(n_obs, cfg.threads, [&](std::size_t i) {
      Rng rng = make_rng(moment_seed, i);
      const Vector x = observations.row(static_cast<Eigen::Index>(i)).transpose();
      moments[i] = moments_from_samples(current.sample(x, sched.moment_samples, rng));
    });
    const MStepResult update = m_step(niw, moments);
    rec.times.inference = seconds_since(start);

    rec.local_means.resize(static_cast<Eigen::Index>(n_obs), d);
    for (std::size_t i = 0; i < n_obs; ++i) rec.local_means.row(static_cast<Eigen::Index>(i)) = moments[i].mean.transpose();
    if (t >= 2) rec.relative_change = relative_change(update.theta_g, s.theta_g);
    s.theta_g = update.theta_g;
    s.sigma_g = update.sigma_g;
    s.posterior = update.posterior;
    rec.theta_g = s.theta_g;
    rec.sigma_g = s.sigma_g;
    rec.posterior = s.posterior;
    rec.dataset_size = s.dataset.size();
    rec.dataset_digest = s.dataset.digest();
    for (const auto& tag : s.dataset.tags()) rec.dataset_counts[tag] = s.dataset.count(tag);
    rec.proposal = s.proposal.components();

    s.consecutive = rec.relative_change && *rec.relative_change < sched.tolerance ? s.consecutive + 1 : 0;
    if (rec.relative_change && *rec.relative_change < best_change) {
      best_change = *rec.relative_change;
      best_index = static_cast<int>(s.history.size());
      best_estimator = current;
    }
    s.history.push_back(std::move(rec));
    s.round = t;
    s.estimator = current.checkpoint;
    s.finished = s.consecutive >= sched.consecutive;
    if (persist) {
      write_json(cfg.out_dir / ("round_" + std::to_string(t) + ".json"), to_json(s.history.back()));
      if (!current.checkpoint.is_null())
        write_json(cfg.out_dir / ("estimator_round_" + std::to_string(t) + ".json"), current.checkpoint);
      save_state(cfg.out_dir, s);
    }
  }

  HierResult out;
  out.converged = s.consecutive >= sched.consecutive;
  out.proposal = s.proposal;
  out.total_simulations = s.total_simulations;
  if (out.converged || best_index < 0) {
    out.selected_round = s.round;
    out.theta_g = s.theta_g;
    out.sigma_g = s.sigma_g;
    out.posterior = s.posterior;
    out.estimator = current;
  } else {
    const auto& best = s.history[static_cast<std::size_t>(best_index)];
    out.selected_round = best.round;
    out.theta_g = best.theta_g;
    out.sigma_g = best.sigma_g;
    out.posterior = best.posterior;
    out.estimator = best_estimator.sample ? best_estimator : current;
  }
  out.history = std::move(s.history);
  out.dataset = std::move(s.dataset);
  return out;
}

}  // namespace ahsnpe
