#include "platoon/platoon.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/core/baselines.hpp"
#include "platoon/core/channel.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/error.hpp"
#include "platoon/core/gdop.hpp"
#include "platoon/core/harness.hpp"
#include "platoon/core/selftest.hpp"

struct plt_config {
  platoon::ScenarioConfig cfg;
};

struct plt_experiment {
  platoon::ExperimentSpec spec;
};

struct plt_results {
  platoon::MetricTable table;
  std::vector<std::string> method_names;
  std::vector<platoon::RmseSummary> summary;
};

struct plt_gdop {
  platoon::GdopReport report;
};

struct plt_selftest {
  std::vector<platoon::CheckResult> checks;
};

namespace {

thread_local std::string last_error;

plt_status status_of(platoon::ErrorCode code) { return static_cast<plt_status>(static_cast<int>(code)); }

plt_status set_error(plt_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <typename F>
plt_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const platoon::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(PLT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(PLT_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(PLT_ERR_INTERNAL, "unknown failure");
  }
}

plt_status null_error(const char* what) {
  return set_error(PLT_ERR_NULL_POINTER, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char* p = text; *p; ++p) {
    if (*p == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (*p != ' ') {
      cur += *p;
    }
  }
  out.push_back(cur);
  std::vector<std::string> kept;
  for (auto& s : out) {
    if (!s.empty()) kept.push_back(s);
  }
  return kept;
}

std::vector<platoon::Method> parse_methods(const char* text) {
  std::vector<platoon::Method> out;
  for (const std::string& name : split_list(text)) out.push_back(platoon::method_from_name(name));
  if (out.empty()) platoon::fail(platoon::ErrorCode::InvalidArgument, "no method given");
  return out;
}

const platoon::RmseSummary* find_summary(const plt_results* res, const char* method, double value) {
  const platoon::Method m = platoon::method_from_name(method);
  for (const auto& s : res->summary) {
    if (s.method == m && s.sweep_value == value) return &s;
  }
  return nullptr;
}

}  // namespace

extern "C" {

const char* plt_version(void) { return "1.0.0"; }

const char* plt_last_error(void) { return last_error.c_str(); }

const char* plt_status_name(plt_status status) {
  switch (status) {
    case PLT_OK: return "ok";
    case PLT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PLT_ERR_INVALID_DIMENSION: return "invalid dimension";
    case PLT_ERR_DEGENERATE_GEOMETRY: return "degenerate geometry";
    case PLT_ERR_OUT_OF_GRID: return "out of grid";
    case PLT_ERR_INVALID_OFFSET: return "invalid offset";
    case PLT_ERR_TRAJECTORY_OVERFLOW: return "trajectory overflow";
    case PLT_ERR_NUMERICAL: return "numerical failure";
    case PLT_ERR_CONDITIONING: return "ill conditioned";
    case PLT_ERR_DEGENERATE_POSTERIOR: return "degenerate posterior";
    case PLT_ERR_DEGENERATE_MESSAGE: return "degenerate message";
    case PLT_ERR_SEARCH_SPACE: return "search space too large";
    case PLT_ERR_SCHEMA: return "schema error";
    case PLT_ERR_IO: return "I/O error";
    case PLT_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case PLT_ERR_EMPTY_INPUT: return "empty input";
    case PLT_ERR_NULL_POINTER: return "null pointer";
    case PLT_ERR_OUT_OF_RANGE: return "index out of range";
    case PLT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void plt_string_free(char* s) { std::free(s); }

plt_status plt_config_preset(const char* name, plt_config** out) {
  if (!name) return null_error("name");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = new plt_config{platoon::preset_config(name)};
    return PLT_OK;
  });
}

plt_status plt_config_from_json(const char* json, plt_config** out) {
  if (!json) return null_error("json");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = new plt_config{platoon::config_from_json_text(json)};
    return PLT_OK;
  });
}

plt_status plt_config_to_json(const plt_config* cfg, char** out) {
  if (!cfg) return null_error("cfg");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = copy_string(platoon::config_to_json_text(cfg->cfg));
    return PLT_OK;
  });
}

plt_status plt_config_set_seed(plt_config* cfg, uint64_t seed) {
  if (!cfg) return null_error("cfg");
  cfg->cfg.seed = seed;
  return PLT_OK;
}

plt_status plt_config_get_seed(const plt_config* cfg, uint64_t* out) {
  if (!cfg) return null_error("cfg");
  if (!out) return null_error("out");
  *out = cfg->cfg.seed;
  return PLT_OK;
}

void plt_config_free(plt_config* cfg) { delete cfg; }

plt_status plt_experiment_create(const plt_config* cfg, const char* methods, plt_experiment** out) {
  if (!cfg) return null_error("cfg");
  if (!methods) return null_error("methods");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    platoon::ExperimentSpec spec;
    spec.cfg = cfg->cfg;
    spec.methods = parse_methods(methods);
    platoon::validate_experiment(spec);
    *out = new plt_experiment{std::move(spec)};
    return PLT_OK;
  });
}

plt_status plt_experiment_from_json(const char* json, plt_experiment** out) {
  if (!json) return null_error("json");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      platoon::fail(platoon::ErrorCode::Schema, std::string("not valid JSON: ") + e.what());
    }
    const bool experiment = j.is_object() && (j.contains("config") || j.contains("methods"));
    platoon::ExperimentSpec spec;
    if (experiment) {
      spec = platoon::experiment_from_json_text(json);
    } else {
      spec.cfg = platoon::config_from_json_text(json);
      spec.methods = {platoon::Method::Dilus};
    }
    *out = new plt_experiment{std::move(spec)};
    return PLT_OK;
  });
}

plt_status plt_experiment_to_json(const plt_experiment* exp, char** out) {
  if (!exp) return null_error("exp");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = copy_string(platoon::experiment_to_json_text(exp->spec));
    return PLT_OK;
  });
}

plt_status plt_experiment_set_methods(plt_experiment* exp, const char* methods) {
  if (!exp) return null_error("exp");
  if (!methods) return null_error("methods");
  return guarded([&] {
    platoon::ExperimentSpec next = exp->spec;
    next.methods = parse_methods(methods);
    platoon::validate_experiment(next);
    exp->spec = std::move(next);
    return PLT_OK;
  });
}

plt_status plt_experiment_set_config(plt_experiment* exp, const plt_config* cfg) {
  if (!exp) return null_error("exp");
  if (!cfg) return null_error("cfg");
  return guarded([&] {
    platoon::validate_config(cfg->cfg);
    exp->spec.cfg = cfg->cfg;
    return PLT_OK;
  });
}

plt_status plt_experiment_get_config(const plt_experiment* exp, plt_config** out) {
  if (!exp) return null_error("exp");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = new plt_config{exp->spec.cfg};
    return PLT_OK;
  });
}

plt_status plt_experiment_set_sweep(plt_experiment* exp, const char* axis, const double* values,
                                    size_t count) {
  if (!exp) return null_error("exp");
  if (!axis) return null_error("axis");
  if (count > 0 && !values) return null_error("values");
  return guarded([&] {
    platoon::ExperimentSpec next = exp->spec;
    next.sweep = platoon::sweep_axis_from_name(axis);
    next.sweep_values.assign(values, values + count);
    if (next.sweep == platoon::SweepAxis::None) next.sweep_values.clear();
    platoon::validate_experiment(next);
    for (double v : next.sweep_values) (void)platoon::apply_sweep(next.cfg, next.sweep, v);
    exp->spec = std::move(next);
    return PLT_OK;
  });
}

plt_status plt_experiment_set_seeds(plt_experiment* exp, const uint64_t* seeds, size_t count) {
  if (!exp) return null_error("exp");
  if (count > 0 && !seeds) return null_error("seeds");
  exp->spec.seeds.assign(seeds, seeds + count);
  return PLT_OK;
}

plt_status plt_experiment_set_output(plt_experiment* exp, const char* dir) {
  if (!exp) return null_error("exp");
  exp->spec.out_dir = dir ? dir : "";
  return PLT_OK;
}

plt_status plt_experiment_set_threads(plt_experiment* exp, size_t threads) {
  if (!exp) return null_error("exp");
  exp->spec.threads = threads;
  return PLT_OK;
}

void plt_experiment_free(plt_experiment* exp) { delete exp; }

plt_status plt_run(const plt_experiment* exp, plt_results** out) {
  if (!exp) return null_error("exp");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    auto* res = new plt_results{platoon::run_experiment(exp->spec), {}, {}};
    for (const auto& r : res->table.rows) res->method_names.push_back(platoon::method_name(r.method));
    res->summary = platoon::summarize(res->table);
    *out = res;
    return PLT_OK;
  });
}

size_t plt_results_row_count(const plt_results* res) { return res ? res->table.rows.size() : 0; }

plt_status plt_results_row(const plt_results* res, size_t index, plt_row* out) {
  if (!res) return null_error("res");
  if (!out) return null_error("out");
  if (index >= res->table.rows.size()) return set_error(PLT_ERR_OUT_OF_RANGE, "row index out of range");
  const platoon::MetricRow& r = res->table.rows[index];
  out->method = res->method_names[index].c_str();
  out->sweep_value = r.sweep_value;
  out->seed = r.seed;
  out->slot = r.slot;
  out->vue_count = r.vue_count;
  out->rmse = r.rmse;
  out->iterations = r.iterations;
  out->converged = r.converged ? 1 : 0;
  out->ok = r.ok() ? 1 : 0;
  return PLT_OK;
}

plt_status plt_results_q_hat(const plt_results* res, size_t index, size_t m, size_t* out) {
  if (!res) return null_error("res");
  if (!out) return null_error("out");
  if (index >= res->table.rows.size()) return set_error(PLT_ERR_OUT_OF_RANGE, "row index out of range");
  const platoon::MetricRow& r = res->table.rows[index];
  if (m >= r.q_hat.size()) return set_error(PLT_ERR_OUT_OF_RANGE, "VUE index out of range");
  *out = r.q_hat[m];
  return PLT_OK;
}

plt_status plt_results_csv(const plt_results* res, char** out) {
  if (!res) return null_error("res");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = copy_string(platoon::results_csv_text(res->table));
    return PLT_OK;
  });
}

plt_status plt_results_rmse(const plt_results* res, const char* method, double sweep_value, double* out) {
  if (!res) return null_error("res");
  if (!method) return null_error("method");
  if (!out) return null_error("out");
  return guarded([&] {
    const platoon::RmseSummary* s = find_summary(res, method, sweep_value);
    if (!s) return set_error(PLT_ERR_OUT_OF_RANGE, "no rows for that method and sweep value");
    if (s->slots == 0) return set_error(PLT_ERR_EMPTY_INPUT, "every row of that method failed");
    *out = s->rmse;
    return PLT_OK;
  });
}

plt_status plt_results_converged_fraction(const plt_results* res, const char* method,
                                          double sweep_value, double* out) {
  if (!res) return null_error("res");
  if (!method) return null_error("method");
  if (!out) return null_error("out");
  return guarded([&] {
    const platoon::RmseSummary* s = find_summary(res, method, sweep_value);
    if (!s) return set_error(PLT_ERR_OUT_OF_RANGE, "no rows for that method and sweep value");
    *out = s->converged_fraction;
    return PLT_OK;
  });
}

double plt_results_seconds(const plt_results* res) { return res ? res->table.total_seconds : 0.0; }

void plt_results_free(plt_results* res) { delete res; }

plt_raster plt_default_raster(void) {
  const platoon::GdopRaster r;
  return plt_raster{r.x_min, r.x_max, r.y_min, r.y_max, r.step, r.z};
}

plt_status plt_gdop_map(const plt_config* cfg, const plt_raster* raster, const char* deployments,
                        double rb_gain, plt_gdop** out) {
  if (!cfg) return null_error("cfg");
  if (!deployments) return null_error("deployments");
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    platoon::GdopRaster r;
    if (raster) r = platoon::GdopRaster{raster->x_min, raster->x_max, raster->y_min,
                                        raster->y_max, raster->step, raster->z};
    std::vector<platoon::GdopDeployment> deps;
    for (const std::string& name : split_list(deployments)) deps.push_back(platoon::deployment_from_name(name));
    const double pl = rb_gain > 0.0
                          ? rb_gain
                          : platoon::ris_bs_gain_magnitude(platoon::scene_ris_bs_channel(cfg->cfg, cfg->cfg.seed));
    *out = new plt_gdop{platoon::gdop_map(cfg->cfg, r, deps, pl)};
    return PLT_OK;
  });
}

size_t plt_gdop_point_count(const plt_gdop* map) { return map ? map->report.points.size() : 0; }

size_t plt_gdop_deployment_count(const plt_gdop* map) { return map ? map->report.deployments.size() : 0; }

plt_status plt_gdop_value(const plt_gdop* map, size_t point, size_t deployment, double* x, double* y,
                          double* gdop) {
  if (!map) return null_error("map");
  if (point >= map->report.points.size() || deployment >= map->report.deployments.size()) {
    return set_error(PLT_ERR_OUT_OF_RANGE, "raster index out of range");
  }
  if (x) *x = map->report.points[point].x();
  if (y) *y = map->report.points[point].y();
  if (gdop) {
    *gdop = map->report.values(static_cast<Eigen::Index>(point), static_cast<Eigen::Index>(deployment));
  }
  return PLT_OK;
}

plt_status plt_gdop_write_csv(const plt_gdop* map, const char* path) {
  if (!map) return null_error("map");
  if (!path) return null_error("path");
  return guarded([&] {
    platoon::write_gdop_csv(map->report, path);
    return PLT_OK;
  });
}

void plt_gdop_free(plt_gdop* map) { delete map; }

plt_status plt_selftest_run(uint64_t seed, plt_selftest** out) {
  if (!out) return null_error("out");
  *out = nullptr;
  return guarded([&] {
    *out = new plt_selftest{platoon::run_selftests(seed)};
    return PLT_OK;
  });
}

size_t plt_selftest_count(const plt_selftest* st) { return st ? st->checks.size() : 0; }

plt_status plt_selftest_result(const plt_selftest* st, size_t index, const char** name, int* pass,
                               const char** detail, double* seconds) {
  if (!st) return null_error("st");
  if (index >= st->checks.size()) return set_error(PLT_ERR_OUT_OF_RANGE, "check index out of range");
  const platoon::CheckResult& c = st->checks[index];
  if (name) *name = c.name.c_str();
  if (pass) *pass = c.pass ? 1 : 0;
  if (detail) *detail = c.detail.c_str();
  if (seconds) *seconds = c.seconds;
  return PLT_OK;
}

void plt_selftest_free(plt_selftest* st) { delete st; }

}  // extern "C"
