#include "platoon/core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "platoon/core/channel.hpp"
#include "platoon/core/error.hpp"

namespace platoon {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  fail(ErrorCode::Schema, path + ": " + msg);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ';';
    out += f(v[i]);
  }
  return out;
}

std::size_t integral_value(double v, const std::string& what) {
  const double r = std::round(v);
  if (!(v > 0.0) || std::abs(v - r) > 1e-9) {
    fail(ErrorCode::InvalidArgument, what + " sweep values must be positive integers");
  }
  return static_cast<std::size_t>(r);
}

std::vector<MetricRow> failed_rows(Method m, SweepAxis axis, double value, std::uint64_t seed,
                                   std::size_t slots, std::size_t M, const std::string& what) {
  std::vector<MetricRow> rows(slots);
  for (std::size_t t = 0; t < slots; ++t) {
    rows[t].method = m;
    rows[t].axis = axis;
    rows[t].sweep_value = value;
    rows[t].seed = seed;
    rows[t].slot = t;
    rows[t].vue_count = M;
    rows[t].status = "error: " + what;
  }
  return rows;
}

struct Cell {
  double value = 0.0;
  std::uint64_t seed = 0;
};

struct CellOutput {
  std::vector<MetricRow> rows;
  std::vector<CellRuntime> runtimes;
};

CellOutput run_cell(const ExperimentSpec& spec, const Cell& cell) {
  CellOutput out;
  const ScenarioConfig cfg =
      spec.sweep == SweepAxis::None ? spec.cfg : apply_sweep(spec.cfg, spec.sweep, cell.value);
  std::optional<Scene> with_ris;
  std::optional<Scene> without_ris;
  std::string scene_error;
  for (Method m : spec.methods) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const bool bs_only = m == Method::BsOnly;
      std::optional<Scene>& slot_scene = bs_only || !cfg.use_ris ? without_ris : with_ris;
      if (!slot_scene) {
        ScenarioConfig c = cfg;
        if (bs_only) c.use_ris = false;
        slot_scene = simulate_scene(c, cell.seed);
      }
      const BaselineResult r = run_method(m, *slot_scene);
      for (std::size_t t = 0; t < r.slots.size(); ++t) {
        const SlotEstimate& e = r.slots[t];
        MetricRow row;
        row.method = m;
        row.axis = spec.sweep;
        row.sweep_value = cell.value;
        row.seed = cell.seed;
        row.slot = t;
        row.vue_count = e.q_hat.size();
        row.rmse = e.rmse;
        row.iterations = e.iterations;
        row.converged = e.converged;
        row.q_hat = e.q_hat;
        row.rmse_trace = e.rmse_trace;
        out.rows.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      const auto rows = failed_rows(m, spec.sweep, cell.value, cell.seed, cfg.T, cfg.M, e.what());
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.runtimes.push_back(CellRuntime{m, cell.value, cell.seed, secs});
  }
  return out;
}

json row_to_json(const MetricRow& r) {
  json j;
  j["method"] = method_name(r.method);
  j["sweep_value"] = r.sweep_value;
  j["seed"] = r.seed;
  j["slot"] = r.slot;
  j["vue_count"] = r.vue_count;
  j["status"] = r.status;
  if (r.ok()) {
    j["rmse"] = r.rmse;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["q_hat"] = r.q_hat;
    j["rmse_trace"] = r.rmse_trace;
  }
  return j;
}

}  // namespace

std::string sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::N: return "N";
    case SweepAxis::NlosPaths: return "nlos_paths";
    case SweepAxis::GridLength: return "grid_length";
    case SweepAxis::SlotInterval: return "slot_interval";
  }
  return "none";
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  for (SweepAxis a : {SweepAxis::None, SweepAxis::N, SweepAxis::NlosPaths, SweepAxis::GridLength,
                      SweepAxis::SlotInterval}) {
    if (sweep_axis_name(a) == name) return a;
  }
  fail(ErrorCode::InvalidArgument, "unknown sweep axis '" + name + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void validate_experiment(const ExperimentSpec& spec) {
  validate_config(spec.cfg);
  if (spec.methods.empty()) schema_error("methods", "at least one method is required");
  std::set<Method> seen;
  for (Method m : spec.methods) {
    if (!seen.insert(m).second) schema_error("methods", "duplicate method " + method_name(m));
  }
  if (spec.sweep != SweepAxis::None) {
    if (spec.sweep_values.empty()) schema_error("sweep.values", "a sweep needs at least one value");
    for (double v : spec.sweep_values) {
      if (!(v > 0.0) || !std::isfinite(v)) schema_error("sweep.values", "values must be positive");
    }
  }
}

std::vector<std::uint64_t> resolved_seeds(const ExperimentSpec& spec) {
  if (!spec.seeds.empty()) return spec.seeds;
  std::vector<std::uint64_t> seeds(spec.cfg.S);
  for (std::size_t s = 0; s < spec.cfg.S; ++s) seeds[s] = spec.cfg.seed + s;
  return seeds;
}

ScenarioConfig apply_sweep(const ScenarioConfig& cfg, SweepAxis axis, double value) {
  ScenarioConfig c = cfg;
  switch (axis) {
    case SweepAxis::None: break;
    case SweepAxis::N: {
      const std::size_t n = integral_value(value, "N");
      const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
      if (side * side != n) fail(ErrorCode::InvalidArgument, "N sweep values must be perfect squares");
      c.N_h = c.N_v = side;
      c.ris_grid_h = c.ris_grid_v = side;
      break;
    }
    case SweepAxis::NlosPaths:
      c.nlos.paths_bs = c.nlos.paths_ris = integral_value(value, "nlos_paths");
      break;
    case SweepAxis::GridLength: {
      if (!(value > 0.0)) fail(ErrorCode::InvalidArgument, "grid_length sweep values must be positive");
      const double road = static_cast<double>(cfg.U) * cfg.grid_length;
      c.grid_length = value;
      c.U = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(road / value)));
      break;
    }
    case SweepAxis::SlotInterval:
      if (!(value > 0.0)) fail(ErrorCode::InvalidArgument, "slot_interval sweep values must be positive");
      c.slot_interval = value;
      break;
  }
  validate_config(c);
  return c;
}

ExperimentSpec experiment_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Schema, std::string("experiment is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) schema_error("experiment", "expected an object");
  static const std::set<std::string> known = {"config", "methods", "sweep", "seeds", "out_dir", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) schema_error(it.key(), "unknown field");
  }
  ExperimentSpec spec;
  if (j.contains("config")) spec.cfg = config_from_json_text(j["config"].dump());
  if (const auto it = j.find("methods"); it != j.end()) {
    if (!it->is_array()) schema_error("methods", "expected an array of names");
    for (const json& m : *it) {
      if (!m.is_string()) schema_error("methods", "expected an array of names");
      try {
        spec.methods.push_back(method_from_name(m.get<std::string>()));
      } catch (const Error& e) {
        schema_error("methods", e.what());
      }
    }
  }
  if (const auto it = j.find("sweep"); it != j.end()) {
    if (!it->is_object()) schema_error("sweep", "expected an object");
    for (auto s = it->begin(); s != it->end(); ++s) {
      if (s.key() != "axis" && s.key() != "values") schema_error("sweep." + s.key(), "unknown field");
    }
    if (const auto a = it->find("axis"); a != it->end()) {
      if (!a->is_string()) schema_error("sweep.axis", "expected a string");
      try {
        spec.sweep = sweep_axis_from_name(a->get<std::string>());
      } catch (const Error& e) {
        schema_error("sweep.axis", e.what());
      }
    }
    if (const auto v = it->find("values"); v != it->end()) {
      if (!v->is_array()) schema_error("sweep.values", "expected an array of numbers");
      for (const json& x : *v) {
        if (!x.is_number()) schema_error("sweep.values", "expected an array of numbers");
        spec.sweep_values.push_back(x.get<double>());
      }
    }
  }
  if (const auto it = j.find("seeds"); it != j.end()) {
    if (!it->is_array()) schema_error("seeds", "expected an array of unsigned integers");
    for (const json& x : *it) {
      if (!x.is_number_unsigned()) schema_error("seeds", "expected an array of unsigned integers");
      spec.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  if (const auto it = j.find("out_dir"); it != j.end()) {
    if (!it->is_string()) schema_error("out_dir", "expected a string");
    spec.out_dir = it->get<std::string>();
  }
  if (const auto it = j.find("threads"); it != j.end()) {
    if (!it->is_number_unsigned()) schema_error("threads", "expected an unsigned integer");
    spec.threads = it->get<std::size_t>();
  }
  validate_experiment(spec);
  return spec;
}

std::string experiment_to_json_text(const ExperimentSpec& spec) {
  json j;
  j["config"] = json::parse(config_to_json_text(spec.cfg));
  j["methods"] = json::array();
  for (Method m : spec.methods) j["methods"].push_back(method_name(m));
  j["sweep"] = {{"axis", sweep_axis_name(spec.sweep)}, {"values", spec.sweep_values}};
  j["seeds"] = spec.seeds;
  j["out_dir"] = spec.out_dir;
  j["threads"] = spec.threads;
  return j.dump(2) + "\n";
}

MetricTable run_experiment(const ExperimentSpec& spec) {
  validate_experiment(spec);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::uint64_t> seeds = resolved_seeds(spec);
  const std::vector<double> values =
      spec.sweep == SweepAxis::None ? std::vector<double>{0.0} : spec.sweep_values;
  if (spec.sweep != SweepAxis::None) {
    for (double v : values) (void)apply_sweep(spec.cfg, spec.sweep, v);
  }
  std::vector<Cell> cells;
  for (double v : values) {
    for (std::uint64_t s : seeds) cells.push_back(Cell{v, s});
  }

  std::vector<CellOutput> outputs(cells.size());
  std::size_t threads = spec.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) outputs[i] = run_cell(spec, cells[i]);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  MetricTable table;
  table.axis = spec.sweep;
  for (CellOutput& o : outputs) {
    table.rows.insert(table.rows.end(), std::make_move_iterator(o.rows.begin()),
                      std::make_move_iterator(o.rows.end()));
    table.runtimes.insert(table.runtimes.end(), o.runtimes.begin(), o.runtimes.end());
  }
  table.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!spec.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + spec.out_dir + ": " + ec.message());
    const std::filesystem::path dir(spec.out_dir);
    write_text_file((dir / "results.csv").string(), results_csv_text(table));
    write_text_file((dir / "results.json").string(), results_json_text(spec, table));
    write_text_file((dir / "config-echo.json").string(), experiment_to_json_text(spec));
  }
  return table;
}

std::string results_csv_text(const MetricTable& table) {
  std::ostringstream os;
  os << "method,sweep_axis,sweep_value,seed,slot,vue_count,rmse,iterations,converged,q_hat,"
        "rmse_trace,status\n";
  for (const MetricRow& r : table.rows) {
    os << csv_field(method_name(r.method)) << ',' << csv_field(sweep_axis_name(r.axis)) << ','
       << (r.axis == SweepAxis::None ? std::string() : format_number(r.sweep_value)) << ','
       << r.seed << ',' << r.slot << ',' << r.vue_count << ',';
    if (r.ok()) {
      os << format_number(r.rmse) << ',' << r.iterations << ',' << (r.converged ? "true" : "false")
         << ',' << csv_field(join(r.q_hat, [](std::size_t q) { return std::to_string(q); })) << ','
         << csv_field(join(r.rmse_trace, [](double v) { return format_number(v); }));
    } else {
      os << ",,,,";
    }
    os << ',' << csv_field(r.status) << '\n';
  }
  return os.str();
}

std::vector<RmseSummary> summarize(const MetricTable& table) {
  struct Acc {
    double se = 0.0;
    std::size_t vues = 0;
    std::size_t slots = 0;
    std::size_t converged = 0;
  };
  std::vector<std::pair<Method, double>> order;
  std::map<std::pair<int, double>, Acc> acc;
  for (const MetricRow& r : table.rows) {
    const auto key = std::make_pair(static_cast<int>(r.method), r.sweep_value);
    if (!acc.count(key)) order.emplace_back(r.method, r.sweep_value);
    Acc& a = acc[key];
    if (!r.ok()) continue;
    a.se += r.rmse * r.rmse * static_cast<double>(r.vue_count);
    a.vues += r.vue_count;
    a.slots += 1;
    a.converged += r.converged ? 1 : 0;
  }
  std::vector<RmseSummary> out;
  for (const auto& [m, v] : order) {
    const Acc& a = acc[{static_cast<int>(m), v}];
    RmseSummary s;
    s.method = m;
    s.sweep_value = v;
    s.slots = a.slots;
    s.rmse = a.vues > 0 ? std::sqrt(a.se / static_cast<double>(a.vues)) : std::nan("");
    s.converged_fraction = a.slots > 0 ? static_cast<double>(a.converged) / static_cast<double>(a.slots) : 0.0;
    out.push_back(s);
  }
  return out;
}

std::string results_json_text(const ExperimentSpec& spec, const MetricTable& table) {
  json j;
  j["schema_version"] = kResultsSchemaVersion;
  j["experiment"] = json::parse(experiment_to_json_text(spec));
  j["sweep_axis"] = sweep_axis_name(table.axis);
  j["rows"] = json::array();
  for (const MetricRow& r : table.rows) j["rows"].push_back(row_to_json(r));
  j["summary"] = json::array();
  for (const RmseSummary& s : summarize(table)) {
    json e = {{"method", method_name(s.method)},
              {"sweep_value", s.sweep_value},
              {"slots", s.slots},
              {"converged_fraction", s.converged_fraction}};
    e["rmse"] = std::isfinite(s.rmse) ? json(s.rmse) : json(nullptr);
    j["summary"].push_back(e);
  }
  j["runtime"] = json::array();
  for (const CellRuntime& c : table.runtimes) {
    j["runtime"].push_back({{"method", method_name(c.method)},
                            {"sweep_value", c.sweep_value},
                            {"seed", c.seed},
                            {"seconds", c.seconds}});
  }
  j["total_seconds"] = table.total_seconds;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "failed writing " + path);
}

double compute_rmse(const std::vector<std::vector<Position3>>& estimates,
                    const std::vector<std::vector<Position3>>& truths) {
  if (estimates.size() != truths.size()) fail(ErrorCode::ShapeMismatch, "estimate and truth counts differ");
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (estimates[i].size() != truths[i].size()) {
      fail(ErrorCode::ShapeMismatch, "estimate and truth VUE counts differ");
    }
    for (std::size_t m = 0; m < estimates[i].size(); ++m) {
      se += (estimates[i][m] - truths[i][m]).squaredNorm();
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::EmptyInput, "no positions to compare");
  return std::sqrt(se / static_cast<double>(n));
}

std::vector<std::pair<double, double>> cdf_table(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::EmptyInput, "CDF of an empty sample");
  for (double v : values) {
    if (std::isnan(v)) fail(ErrorCode::InvalidArgument, "CDF sample contains NaN");
  }
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

}  // namespace platoon
