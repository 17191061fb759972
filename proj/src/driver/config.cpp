#include "ahsnpe/config.hpp"

#include <fstream>
#include <set>

namespace ahsnpe {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidArgument("config section '" + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw InvalidArgument("unknown config key '" + section + "." + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Vector vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix matrix_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw InvalidArgument("ragged matrix in config");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

json to_json_vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json_mat(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json_vec(m.row(r).transpose()));
  return rows;
}

EstimatorSpec estimator_from(const json& j, const std::string& section, EstimatorSpec spec) {
  check_keys(j, section, {"kind", "hidden_units", "n_transforms", "n_components"});
  if (j.contains("kind")) spec.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
  read(j, "hidden_units", spec.hidden_units);
  read(j, "n_transforms", spec.n_transforms);
  read(j, "n_components", spec.n_components);
  return spec;
}

json estimator_to(const EstimatorSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"hidden_units", s.hidden_units},
          {"n_transforms", s.n_transforms},
          {"n_components", s.n_components}};
}

DyadProposal proposal_from(const std::string& name) {
  if (name == "tnt" || name == "tie-no-tie") return DyadProposal::kTieNoTie;
  if (name == "uniform") return DyadProposal::kUniformDyad;
  throw InvalidArgument("unknown dyad proposal '" + name + "'");
}

}  // namespace

NiwHyper Settings::resolved_niw() const {
  NiwHyper h = niw ? *niw : NiwHyper::weakly_informative(model.dim());
  if (h.dim() != model.dim()) throw InvalidArgument("hyper-prior dimension does not match the model terms");
  h.validate();
  return h;
}

Settings settings_from_json(const json& j) {
  Settings s;
  try {
    check_keys(j, "", {"model", "sim", "niw", "schedule", "train", "binarise", "exchange", "hier"});
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model", {"terms", "decay"});
      if (m.contains("terms")) {
        s.model.terms.clear();
        for (const auto& t : m.at("terms")) s.model.terms.push_back(statistic_from_string(t.get<std::string>()));
        if (s.model.terms.empty()) throw InvalidArgument("model needs at least one term");
      }
      read(m, "decay", s.model.decay);
      if (!(s.model.decay > 0.0)) throw InvalidArgument("model.decay must be positive");
    }
    if (j.contains("sim")) {
      const auto& m = j.at("sim");
      check_keys(m, "sim", {"burn_in", "thin", "proposal"});
      read(m, "burn_in", s.sim.burn_in);
      read(m, "thin", s.sim.thin);
      if (m.contains("proposal")) s.sim.proposal = proposal_from(m.at("proposal").get<std::string>());
      s.sim.validate();
    }
    if (j.contains("niw")) {
      const auto& m = j.at("niw");
      check_keys(m, "niw", {"mu0", "kappa0", "psi0", "nu0"});
      NiwHyper h{vector_from(m.at("mu0")), m.at("kappa0").get<double>(), matrix_from(m.at("psi0")),
                 m.at("nu0").get<double>()};
      h.validate();
      s.niw = h;
    }
    if (j.contains("schedule")) {
      const auto& m = j.at("schedule");
      auto& sc = s.schedule;
      check_keys(m, "schedule",
                 {"t_initial", "n_initial", "n_round", "n_refined", "cov_inflation", "initial_mean",
                  "initial_cov_scale", "burn_in_estimator", "main_estimator", "max_rounds", "tolerance",
                  "consecutive", "moment_samples", "final_samples"});
      read(m, "t_initial", sc.t_initial);
      read(m, "n_initial", sc.n_initial);
      read(m, "n_round", sc.n_round);
      read(m, "n_refined", sc.n_refined);
      read(m, "cov_inflation", sc.cov_inflation);
      if (m.contains("initial_mean")) sc.initial_mean = vector_from(m.at("initial_mean"));
      read(m, "initial_cov_scale", sc.initial_cov_scale);
      if (m.contains("burn_in_estimator"))
        sc.burn_in_estimator = estimator_from(m.at("burn_in_estimator"), "schedule.burn_in_estimator", sc.burn_in_estimator);
      if (m.contains("main_estimator"))
        sc.main_estimator = estimator_from(m.at("main_estimator"), "schedule.main_estimator", sc.main_estimator);
      read(m, "max_rounds", sc.max_rounds);
      read(m, "tolerance", sc.tolerance);
      read(m, "consecutive", sc.consecutive);
      read(m, "moment_samples", sc.moment_samples);
      read(m, "final_samples", sc.final_samples);
      sc.validate();
    }
    if (j.contains("train")) {
      const auto& m = j.at("train");
      check_keys(m, "train",
                 {"batch_size", "learning_rate", "max_epochs", "patience", "val_fraction", "n_atoms", "grad_clip"});
      read(m, "batch_size", s.train.batch_size);
      read(m, "learning_rate", s.train.learning_rate);
      read(m, "max_epochs", s.train.max_epochs);
      read(m, "patience", s.train.patience);
      read(m, "val_fraction", s.train.val_fraction);
      read(m, "n_atoms", s.train.n_atoms);
      read(m, "grad_clip", s.train.grad_clip);
      s.train.validate();
    }
    if (j.contains("binarise")) {
      check_keys(j.at("binarise"), "binarise", {"target_degree"});
      read(j.at("binarise"), "target_degree", s.target_degree);
      if (!(s.target_degree > 0.0)) throw InvalidArgument("binarise.target_degree must be positive");
    }
    if (j.contains("exchange")) {
      const auto& m = j.at("exchange");
      check_keys(m, "exchange", {"n_iters", "adapt_iters", "thin", "target_acceptance", "prior_mean", "prior_cov"});
      read(m, "n_iters", s.exchange.n_iters);
      read(m, "adapt_iters", s.exchange.adapt_iters);
      read(m, "thin", s.exchange.thin);
      read(m, "target_acceptance", s.exchange.target_acceptance);
      if (m.contains("prior_mean")) s.exchange_prior_mean = vector_from(m.at("prior_mean"));
      if (m.contains("prior_cov")) s.exchange_prior_cov = matrix_from(m.at("prior_cov"));
    }
    if (j.contains("hier")) {
      const auto& m = j.at("hier");
      check_keys(m, "hier", {"n_iters", "burn_in", "target_acceptance"});
      read(m, "n_iters", s.hier.n_iters);
      read(m, "burn_in", s.hier.burn_in);
      read(m, "target_acceptance", s.hier.target_acceptance);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }
  return s;
}

json settings_to_json(const Settings& s) {
  json j;
  json terms = json::array();
  for (auto t : s.model.terms) terms.push_back(to_string(t));
  j["model"] = {{"terms", terms}, {"decay", s.model.decay}};
  j["sim"] = {{"burn_in", s.sim.burn_in},
              {"thin", s.sim.thin},
              {"proposal", s.sim.proposal == DyadProposal::kTieNoTie ? "tnt" : "uniform"}};
  const NiwHyper h = s.resolved_niw();
  j["niw"] = {{"mu0", to_json_vec(h.mu0)}, {"kappa0", h.kappa0}, {"psi0", to_json_mat(h.psi0)}, {"nu0", h.nu0}};
  const auto& sc = s.schedule;
  j["schedule"] = {{"t_initial", sc.t_initial},
                   {"n_initial", sc.n_initial},
                   {"n_round", sc.n_round},
                   {"n_refined", sc.n_refined},
                   {"cov_inflation", sc.cov_inflation},
                   {"initial_mean", to_json_vec(sc.initial_mean.size() ? sc.initial_mean : Vector::Zero(s.model.dim()))},
                   {"initial_cov_scale", sc.initial_cov_scale},
                   {"burn_in_estimator", estimator_to(sc.burn_in_estimator)},
                   {"main_estimator", estimator_to(sc.main_estimator)},
                   {"max_rounds", sc.max_rounds},
                   {"tolerance", sc.tolerance},
                   {"consecutive", sc.consecutive},
                   {"moment_samples", sc.moment_samples},
                   {"final_samples", sc.final_samples}};
  j["train"] = {{"batch_size", s.train.batch_size}, {"learning_rate", s.train.learning_rate},
                {"max_epochs", s.train.max_epochs}, {"patience", s.train.patience},
                {"val_fraction", s.train.val_fraction}, {"n_atoms", s.train.n_atoms},
                {"grad_clip", s.train.grad_clip}};
  j["binarise"] = {{"target_degree", s.target_degree}};
  j["exchange"] = {{"n_iters", s.exchange.n_iters},
                   {"adapt_iters", s.exchange.adapt_iters},
                   {"thin", s.exchange.thin},
                   {"target_acceptance", s.exchange.target_acceptance}};
  if (s.exchange_prior_mean.size()) j["exchange"]["prior_mean"] = to_json_vec(s.exchange_prior_mean);
  if (s.exchange_prior_cov.size()) j["exchange"]["prior_cov"] = to_json_mat(s.exchange_prior_cov);
  j["hier"] = {{"n_iters", s.hier.n_iters}, {"burn_in", s.hier.burn_in}, {"target_acceptance", s.hier.target_acceptance}};
  return j;
}

Settings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return settings_from_json(j);
}

}  // namespace ahsnpe
