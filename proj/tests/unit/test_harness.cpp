#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "platoon/core/harness.hpp"
#include "test_support.hpp"

using namespace platoon;
using platoon::test::throws_code;

namespace {

ExperimentSpec tiny_experiment() {
  ExperimentSpec spec;
  spec.cfg = test::small_los_config(1, 2);
  spec.methods = {Method::Dilus, Method::Lasso};
  spec.threads = 1;
  return spec;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("RMSE examples") {
  const std::vector<std::vector<Position3>> truth = {{Position3(0, 0, 0), Position3(1, 0, 0)}};
  CHECK(compute_rmse(truth, truth) == 0.0);
  const std::vector<std::vector<Position3>> est = {{Position3(3, 4, 0), Position3(1, 0, 0)}};
  CHECK(compute_rmse(est, truth) == doctest::Approx(std::sqrt(12.5)));
  CHECK(throws_code([&] { compute_rmse(est, {}); }, ErrorCode::ShapeMismatch));
  CHECK(throws_code([&] { compute_rmse({{Position3(0, 0, 0)}}, truth); }, ErrorCode::ShapeMismatch));
  CHECK(throws_code([] { compute_rmse({}, {}); }, ErrorCode::EmptyInput));
}

TEST_CASE("CDF examples") {
  const auto one = cdf_table({2.5});
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::make_pair(2.5, 1.0));
  const auto two = cdf_table({2.0, 1.0});
  REQUIRE(two.size() == 2);
  CHECK(two[0] == std::make_pair(1.0, 0.5));
  CHECK(two[1] == std::make_pair(2.0, 1.0));
  const auto tied = cdf_table({1.0, 1.0, 3.0});
  REQUIRE(tied.size() == 2);
  CHECK(tied[0].second == doctest::Approx(2.0 / 3.0));
  CHECK(throws_code([] { cdf_table({}); }, ErrorCode::EmptyInput));
  CHECK(throws_code([] { cdf_table({std::nan("")}); }, ErrorCode::InvalidArgument));
}

TEST_CASE("CDF of uniform samples stays near the diagonal") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(1000);
  for (double& x : v) x = u(rng);
  double ks = 0.0;
  double prev = 0.0;
  for (const auto& [x, f] : cdf_table(v)) {
    ks = std::max({ks, std::abs(f - x), std::abs(prev - x)});
    prev = f;
  }
  CHECK(ks < 0.06);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5, 12345678.9}) {
    CHECK(std::stod(format_number(v)) == v);
  }
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("configuration and experiment documents round-trip") {
  for (const char* name : {"default", "full", "desk"}) {
    const ScenarioConfig cfg = preset_config(name);
    CHECK(config_from_json_text(config_to_json_text(cfg)) == cfg);
  }
  ExperimentSpec spec = tiny_experiment();
  spec.sweep = SweepAxis::NlosPaths;
  spec.sweep_values = {1, 4};
  spec.seeds = {3, 9};
  spec.out_dir = "out";
  CHECK(experiment_from_json_text(experiment_to_json_text(spec)) == spec);
}

TEST_CASE("experiment documents reject malformed fields") {
  CHECK(throws_code([] { experiment_from_json_text("{"); }, ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": ["dilus"], "colour": 1})"); },
                    ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": ["kalman"]})"); }, ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": []})"); }, ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": ["map", "map"]})"); }, ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": ["map"], "sweep": {"axis": "N"}})"); },
                    ErrorCode::Schema));
  CHECK(throws_code([] { experiment_from_json_text(R"({"methods": ["map"], "seeds": [-1]})"); },
                    ErrorCode::Schema));
  CHECK(throws_code([] { config_from_json_text(R"({"K": "eight"})"); }, ErrorCode::Schema));
}

TEST_CASE("sweep axes edit the scenario") {
  const ScenarioConfig cfg = preset_config("desk");
  const ScenarioConfig n = apply_sweep(cfg, SweepAxis::N, 36);
  CHECK(n.N_h == 6);
  CHECK(n.N_v == 6);
  CHECK(n.ris_grid_h == 6);
  const ScenarioConfig l = apply_sweep(cfg, SweepAxis::NlosPaths, 3);
  CHECK(l.nlos.paths_bs == 3);
  CHECK(l.nlos.paths_ris == 3);
  const ScenarioConfig g = apply_sweep(cfg, SweepAxis::GridLength, 2.0 * cfg.grid_length);
  CHECK(g.U == cfg.U / 2);
  CHECK(apply_sweep(cfg, SweepAxis::SlotInterval, 0.2).slot_interval == 0.2);
  CHECK(apply_sweep(cfg, SweepAxis::None, 7) == cfg);
  CHECK(throws_code([&] { apply_sweep(cfg, SweepAxis::N, 10); }, ErrorCode::InvalidArgument));
  CHECK(throws_code([&] { apply_sweep(cfg, SweepAxis::NlosPaths, 1.5); }, ErrorCode::InvalidArgument));
  CHECK(throws_code([&] { apply_sweep(cfg, SweepAxis::SlotInterval, 0.0); }, ErrorCode::InvalidArgument));
  for (SweepAxis a : {SweepAxis::None, SweepAxis::N, SweepAxis::NlosPaths, SweepAxis::GridLength,
                      SweepAxis::SlotInterval}) {
    CHECK(sweep_axis_from_name(sweep_axis_name(a)) == a);
  }
}

TEST_CASE("seed resolution") {
  ExperimentSpec spec = tiny_experiment();
  spec.cfg.S = 3;
  spec.cfg.seed = 40;
  CHECK(resolved_seeds(spec) == std::vector<std::uint64_t>{40, 41, 42});
  spec.seeds = {7};
  CHECK(resolved_seeds(spec) == std::vector<std::uint64_t>{7});
}

TEST_CASE("experiment table layout and files") {
  ExperimentSpec spec = tiny_experiment();
  spec.seeds = {1};
  const MetricTable one = run_experiment(spec);
  CHECK(one.rows.size() == 2 * spec.cfg.T);
  spec.seeds = {1, 2};
  const MetricTable two = run_experiment(spec);
  REQUIRE(two.rows.size() == 2 * one.rows.size());
  CHECK(two.rows[0].method == Method::Dilus);
  CHECK(two.rows[spec.cfg.T].method == Method::Lasso);
  CHECK(two.rows[2 * spec.cfg.T].seed == 2);
  for (const MetricRow& r : two.rows) {
    CHECK(r.ok());
    CHECK(r.q_hat.size() == spec.cfg.M);
    CHECK(r.vue_count == spec.cfg.M);
  }

  const std::vector<std::string> csv = lines_of(results_csv_text(two));
  REQUIRE(csv.size() == two.rows.size() + 1);
  CHECK(csv[0] ==
        "method,sweep_axis,sweep_value,seed,slot,vue_count,rmse,iterations,converged,q_hat,rmse_trace,status");

  const auto summary = summarize(two);
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].method == Method::Dilus);
  CHECK(summary[0].slots == 2 * spec.cfg.T);

  const auto dir = std::filesystem::temp_directory_path() / "platoon_harness_test";
  std::filesystem::remove_all(dir);
  spec.out_dir = dir.string();
  const MetricTable written = run_experiment(spec);
  for (const char* f : {"results.csv", "results.json", "config-echo.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream in(dir / "results.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["schema_version"] == kResultsSchemaVersion);
  CHECK(j["rows"].size() == written.rows.size());
  CHECK(experiment_from_json_text(j["experiment"].dump()) == spec);
  std::filesystem::remove_all(dir);
}

TEST_CASE("failed methods are recorded per row") {
  ExperimentSpec spec = tiny_experiment();
  spec.methods = {Method::Map, Method::Lasso};
  spec.cfg.algo.map_state_cap = 10.0;
  spec.seeds = {1};
  const MetricTable t = run_experiment(spec);
  REQUIRE(t.rows.size() == 2 * spec.cfg.T);
  for (const MetricRow& r : t.rows) {
    CHECK(r.ok() == (r.method == Method::Lasso));
    if (!r.ok()) CHECK(r.status.rfind("error: ", 0) == 0);
  }
  CHECK(lines_of(results_csv_text(t)).size() == t.rows.size() + 1);
}

TEST_CASE("sweeps multiply the table") {
  ExperimentSpec spec = tiny_experiment();
  spec.methods = {Method::Lasso};
  spec.seeds = {1};
  spec.sweep = SweepAxis::SlotInterval;
  spec.sweep_values = {0.1, 0.2};
  const MetricTable t = run_experiment(spec);
  REQUIRE(t.rows.size() == 2 * spec.cfg.T);
  CHECK(t.axis == SweepAxis::SlotInterval);
  CHECK(t.rows.front().sweep_value == 0.1);
  CHECK(t.rows.back().sweep_value == 0.2);
  spec.sweep_values.clear();
  CHECK(throws_code([&] { run_experiment(spec); }, ErrorCode::Schema));
}
