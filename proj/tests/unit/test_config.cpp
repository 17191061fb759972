#include <doctest.h>

#include <fstream>

#include "ahsnpe/config.hpp"
#include "support.hpp"

using namespace ahsnpe;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("empty document gives defaults") {
    const auto s = settings_from_json(json::object());
    CHECK(s.model.dim() == 3);
    CHECK(s.schedule.n_initial == 100000);
    CHECK(s.schedule.t_initial == 4);
    CHECK(s.train.learning_rate == 5e-4);
    const auto niw = s.resolved_niw();
    CHECK(niw.nu0 == 5.0);
    CHECK(niw.psi0 == 3.0 * Matrix::Identity(3, 3));
  }

  TEST_CASE("sections are read") {
    const json j = json::parse(R"({
      "model": {"terms": ["edges"]},
      "niw": {"mu0": [-1.5], "kappa0": 2, "psi0": [[0.5]], "nu0": 4},
      "schedule": {"t_initial": 3, "n_initial": 2000, "n_round": 500, "n_refined": 800,
                   "main_estimator": {"kind": "mdn", "n_components": 2}},
      "train": {"max_epochs": 7},
      "sim": {"proposal": "uniform", "thin": 10}
    })");
    const auto s = settings_from_json(j);
    CHECK(s.model.dim() == 1);
    CHECK(s.resolved_niw().mu0[0] == -1.5);
    CHECK(s.schedule.n_refined == 800);
    CHECK(s.schedule.main_estimator.kind == EstimatorKind::kMdn);
    CHECK(s.schedule.main_estimator.n_components == 2);
    CHECK(s.schedule.main_estimator.hidden_units == 64);  // untouched field keeps its default
    CHECK(s.train.max_epochs == 7);
    CHECK(s.sim.proposal == DyadProposal::kUniformDyad);

    // Writing and reading back is a fixed point.
    const json out = settings_to_json(s);
    CHECK(settings_to_json(settings_from_json(out)) == out);
  }

  TEST_CASE("unknown keys and bad values are rejected") {
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"modle": {}})")), InvalidArgument);
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"train": {"lr": 0.1}})")), InvalidArgument);
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"train": {"max_epochs": "many"}})")), InvalidArgument);
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"schedule": {"t_initial": 1}})")), InvalidArgument);
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"model": {"terms": ["stars"]}})")), InvalidArgument);
    CHECK_THROWS_AS(settings_from_json(json::parse(R"({"sim": {"proposal": "gibbs"}})")), InvalidArgument);
    const auto s = settings_from_json(json::parse(R"({"model": {"terms": ["edges"]}, "niw": {"mu0": [0, 0],
        "kappa0": 1, "psi0": [[1, 0], [0, 1]], "nu0": 4}})"));
    CHECK_THROWS_AS(s.resolved_niw(), InvalidArgument);
  }

  TEST_CASE("files") {
    const auto dir = testing::scratch_dir("config");
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_settings(dir / "bad.json"), InvalidArgument);
    CHECK_THROWS_AS(load_settings(dir / "missing.json"), InvalidArgument);
    std::ofstream(dir / "ok.json") << R"({"binarise": {"target_degree": 4}})";
    CHECK(load_settings(dir / "ok.json").target_degree == 4.0);
  }
}
