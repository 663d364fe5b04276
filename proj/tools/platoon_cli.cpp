#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "platoon/platoon.h"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string methods;
  std::string sweep;
  std::size_t threads = 0;
};

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check(plt_status s, const char* what) {
  if (s != PLT_OK) {
    throw CliError(std::string(what) + ": " + plt_status_name(s) + ": " + plt_last_error());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

plt_config* load_config(const CommonOptions& o) {
  if (!o.config_path.empty() && !o.preset.empty()) throw CliError("--config and --preset are exclusive");
  plt_config* cfg = nullptr;
  if (!o.config_path.empty()) {
    plt_experiment* exp = nullptr;
    check(plt_experiment_from_json(read_file(o.config_path).c_str(), &exp), "config");
    const plt_status s = plt_experiment_get_config(exp, &cfg);
    plt_experiment_free(exp);
    check(s, "config");
  } else {
    check(plt_config_preset(o.preset.empty() ? "default" : o.preset.c_str(), &cfg), "preset");
  }
  if (o.seed) plt_config_set_seed(cfg, *o.seed);
  return cfg;
}

void parse_sweep(const std::string& text, std::string& axis, std::vector<double>& values) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw CliError("--sweep expects <axis>=<v1,v2,...>");
  axis = text.substr(0, eq);
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end == item.c_str() || *end != '\0') throw CliError("bad sweep value '" + item + "'");
    values.push_back(v);
  }
}

plt_experiment* build_experiment(const CommonOptions& o, const char* default_methods) {
  plt_experiment* exp = nullptr;
  if (!o.config_path.empty()) {
    if (!o.preset.empty()) throw CliError("--config and --preset are exclusive");
    check(plt_experiment_from_json(read_file(o.config_path).c_str(), &exp), "config");
    if (o.seed) {
      plt_config* cfg = nullptr;
      check(plt_experiment_get_config(exp, &cfg), "config");
      plt_config_set_seed(cfg, *o.seed);
      const plt_status s = plt_experiment_set_config(exp, cfg);
      plt_config_free(cfg);
      check(s, "config");
    }
    if (!o.methods.empty()) check(plt_experiment_set_methods(exp, o.methods.c_str()), "methods");
  } else {
    plt_config* cfg = load_config(o);
    const std::string methods = o.methods.empty() ? default_methods : o.methods;
    const plt_status s = plt_experiment_create(cfg, methods.c_str(), &exp);
    plt_config_free(cfg);
    check(s, "experiment");
  }
  if (!o.sweep.empty()) {
    std::string axis;
    std::vector<double> values;
    parse_sweep(o.sweep, axis, values);
    check(plt_experiment_set_sweep(exp, axis.c_str(), values.data(), values.size()), "sweep");
  }
  check(plt_experiment_set_output(exp, o.out.c_str()), "output");
  check(plt_experiment_set_threads(exp, o.threads), "threads");
  return exp;
}

int run_experiment_command(const CommonOptions& o, const char* default_methods) {
  plt_experiment* exp = build_experiment(o, default_methods);
  plt_results* res = nullptr;
  const plt_status s = plt_run(exp, &res);
  plt_experiment_free(exp);
  check(s, "run");

  std::vector<std::pair<std::string, double>> keys;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < plt_results_row_count(res); ++i) {
    plt_row row;
    plt_results_row(res, i, &row);
    if (!row.ok) ++failed;
    const std::pair<std::string, double> key{row.method, row.sweep_value};
    bool seen = false;
    for (const auto& k : keys) seen = seen || k == key;
    if (!seen) keys.push_back(key);
  }
  std::printf("%-12s %12s %12s %10s\n", "method", "sweep", "rmse", "converged");
  for (const auto& [method, value] : keys) {
    double rmse = 0.0, conv = 0.0;
    const bool ok = plt_results_rmse(res, method.c_str(), value, &rmse) == PLT_OK;
    plt_results_converged_fraction(res, method.c_str(), value, &conv);
    if (ok) {
      std::printf("%-12s %12g %12.6f %10.3f\n", method.c_str(), value, rmse, conv);
    } else {
      std::printf("%-12s %12g %12s %10s\n", method.c_str(), value, "failed", "-");
    }
  }
  std::printf("%zu rows (%zu failed) in %.1f s, written to %s\n", plt_results_row_count(res), failed,
              plt_results_seconds(res), o.out.c_str());
  plt_results_free(res);
  return 0;
}

int gdop_command(const CommonOptions& o, const std::string& deployments, double step) {
  plt_config* cfg = load_config(o);
  plt_raster raster = plt_default_raster();
  raster.step = step;
  plt_gdop* map = nullptr;
  const plt_status s = plt_gdop_map(cfg, &raster, deployments.c_str(), 0.0, &map);
  plt_config_free(cfg);
  check(s, "gdop-map");
  std::filesystem::create_directories(o.out);
  const std::string path = (std::filesystem::path(o.out) / "gdop.csv").string();
  const plt_status w = plt_gdop_write_csv(map, path.c_str());
  const std::size_t n = plt_gdop_point_count(map);
  plt_gdop_free(map);
  check(w, "gdop-map");
  std::printf("%zu raster points written to %s\n", n, path.c_str());
  return 0;
}

int selftest_command(std::uint64_t seed) {
  plt_selftest* st = nullptr;
  check(plt_selftest_run(seed, &st), "selftest");
  int failures = 0;
  for (std::size_t i = 0; i < plt_selftest_count(st); ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int pass = 0;
    double secs = 0.0;
    plt_selftest_result(st, i, &name, &pass, &detail, &secs);
    std::printf("%s  %s: %s (%.2f s)\n", pass ? "PASS" : "FAIL", name, detail, secs);
    failures += pass ? 0 : 1;
  }
  plt_selftest_free(st);
  return failures == 0 ? 0 : 1;
}

void add_common(CLI::App* app, CommonOptions& o, bool with_methods) {
  app->add_option("--config", o.config_path, "Scenario or experiment JSON file");
  app->add_option("--preset", o.preset, "Preset name: default, full, desk");
  app->add_option("--seed", o.seed, "Base seed of the scenario");
  app->add_option("--out", o.out, "Output directory");
  if (with_methods) {
    app->add_option("--methods", o.methods, "Comma-separated methods");
    app->add_option("--sweep", o.sweep, "Sweep as <axis>=<v1,v2,...>");
    app->add_option("--threads", o.threads, "Worker threads, 0 for all cores");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Platoon tracking with a base station and a reconfigurable surface"};
  app.require_subcommand(1);

  CommonOptions sim_opt, cmp_opt, gdop_opt;
  auto* sim = app.add_subcommand("simulate", "Run an experiment");
  add_common(sim, sim_opt, true);
  auto* cmp = app.add_subcommand("compare", "Run every method on shared scenes");
  add_common(cmp, cmp_opt, true);
  auto* gdop = app.add_subcommand("gdop-map", "Write the GDOP raster as gdop.csv");
  add_common(gdop, gdop_opt, false);
  std::string deployments = "BS,RIS,BS+RIS,BS+BS";
  double step = 5.0;
  gdop->add_option("--deployments", deployments, "Comma-separated deployments");
  gdop->add_option("--step", step, "Raster step in meters");
  std::uint64_t st_seed = 1;
  auto* st = app.add_subcommand("selftest", "Run the oracle and property checks");
  st->add_option("--seed", st_seed, "Seed of the random instances");

  CLI11_PARSE(app, argc, argv);
  try {
    if (sim->parsed()) return run_experiment_command(sim_opt, "dilus");
    if (cmp->parsed()) return run_experiment_command(cmp_opt, "dilus,no_offgrid,naive_vbi,lasso,map");
    if (gdop->parsed()) return gdop_command(gdop_opt, deployments, step);
    if (st->parsed()) return selftest_command(st_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
