#pragma once

#include <filesystem>

#include <json.hpp>

#include "ahsnpe/driver.hpp"
#include "ahsnpe/refbayes.hpp"

namespace ahsnpe {

/// Settings shared by the CLI subcommands, read from a JSON document. Every
/// section is optional; unknown keys are rejected.
struct Settings {
  ErgmModel model;
  SimConfig sim;
  /// Absent selects NiwHyper::weakly_informative(model.dim()).
  std::optional<NiwHyper> niw;
  Schedule schedule;
  TrainConfig train;
  double target_degree = 3.0;
  ExchangeConfig exchange;
  /// Single-network prior for the exchange sampler; empty selects N(0, 10 I).
  Vector exchange_prior_mean;
  Matrix exchange_prior_cov;
  HierGibbsConfig hier;

  NiwHyper resolved_niw() const;
};

Settings settings_from_json(const nlohmann::json& j);
nlohmann::json settings_to_json(const Settings& s);
Settings load_settings(const std::filesystem::path& path);

}  // namespace ahsnpe
