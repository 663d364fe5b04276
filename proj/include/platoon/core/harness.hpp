#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "platoon/core/baselines.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

inline constexpr int kResultsSchemaVersion = 1;

enum class SweepAxis { None, N, NlosPaths, GridLength, SlotInterval };

std::string sweep_axis_name(SweepAxis a);
SweepAxis sweep_axis_from_name(const std::string& name);

struct ExperimentSpec {
  ScenarioConfig cfg;
  std::vector<Method> methods;
  SweepAxis sweep = SweepAxis::None;
  std::vector<double> sweep_values;  // ignored when sweep is None
  std::vector<std::uint64_t> seeds;  // empty means cfg.seed + s for s < cfg.S
  std::string out_dir;               // empty writes nothing
  std::size_t threads = 0;           // 0 picks the hardware concurrency

  bool operator==(const ExperimentSpec&) const = default;
};

// Throws Schema errors naming the offending field.
void validate_experiment(const ExperimentSpec& spec);

std::vector<std::uint64_t> resolved_seeds(const ExperimentSpec& spec);

// Scenario for one sweep value. N sets N_h = N_v = sqrt(N) and the RIS angle
// grid to the same size; nlos_paths sets both path counts; grid_length
// rescales U to keep the road length; slot_interval sets the slot duration.
ScenarioConfig apply_sweep(const ScenarioConfig& cfg, SweepAxis axis, double value);

ExperimentSpec experiment_from_json_text(const std::string& text);
std::string experiment_to_json_text(const ExperimentSpec& spec);

struct MetricRow {
  Method method = Method::Dilus;
  SweepAxis axis = SweepAxis::None;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  std::size_t slot = 0;
  std::size_t vue_count = 0;
  double rmse = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<std::size_t> q_hat;
  std::vector<double> rmse_trace;
  std::string status = "ok";  // "error: <message>" when the method failed

  bool ok() const { return status == "ok"; }
};

struct CellRuntime {
  Method method = Method::Dilus;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

// Rows are ordered by sweep value, seed, method (in request order), slot.
struct MetricTable {
  SweepAxis axis = SweepAxis::None;
  std::vector<MetricRow> rows;
  std::vector<CellRuntime> runtimes;
  double total_seconds = 0.0;
};

// Runs every (sweep value, seed) cell on a worker pool; all methods of a cell
// share one simulated scene. Writes results.csv, results.json and
// config-echo.json when out_dir is set.
MetricTable run_experiment(const ExperimentSpec& spec);

// Header method,sweep_axis,sweep_value,seed,slot,vue_count,rmse,iterations,
// converged,q_hat,rmse_trace,status; lists are ';'-separated.
std::string results_csv_text(const MetricTable& table);
std::string results_json_text(const ExperimentSpec& spec, const MetricTable& table);
void write_text_file(const std::string& path, const std::string& text);

struct RmseSummary {
  Method method = Method::Dilus;
  double sweep_value = 0.0;
  double rmse = 0.0;
  std::size_t slots = 0;
  double converged_fraction = 0.0;
};

// Per method and sweep value over successful rows, in first-appearance order.
std::vector<RmseSummary> summarize(const MetricTable& table);

// sqrt of the mean squared position error over every (slot, VUE) pair.
double compute_rmse(const std::vector<std::vector<Position3>>& estimates,
                    const std::vector<std::vector<Position3>>& truths);

// Sorted (value, cumulative fraction) pairs; repeated values collapse to one step.
std::vector<std::pair<double, double>> cdf_table(std::vector<double> values);

// Shortest round-trip decimal form of a double.
std::string format_number(double v);

}  // namespace platoon
