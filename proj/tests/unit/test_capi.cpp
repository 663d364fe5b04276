#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "platoon/platoon.h"

namespace {

plt_config* small_config() {
  plt_config* desk = nullptr;
  REQUIRE(plt_config_preset("desk", &desk) == PLT_OK);
  char* text = nullptr;
  REQUIRE(plt_config_to_json(desk, &text) == PLT_OK);
  nlohmann::json j = nlohmann::json::parse(text);
  plt_string_free(text);
  plt_config_free(desk);
  j["T"] = 2;
  j["M"] = 1;
  plt_config* cfg = nullptr;
  REQUIRE(plt_config_from_json(j.dump().c_str(), &cfg) == PLT_OK);
  return cfg;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(plt_version()) == "1.0.0");
  CHECK(std::string(plt_status_name(PLT_OK)) == "ok");
  CHECK(std::string(plt_status_name(PLT_ERR_SEARCH_SPACE)).size() > 0);
}

TEST_CASE("null pointers and unknown names are reported") {
  plt_config* cfg = nullptr;
  CHECK(plt_config_preset(nullptr, &cfg) == PLT_ERR_NULL_POINTER);
  CHECK(plt_config_preset("desk", nullptr) == PLT_ERR_NULL_POINTER);
  CHECK(plt_config_preset("highway", &cfg) == PLT_ERR_INVALID_ARGUMENT);
  CHECK(cfg == nullptr);
  CHECK(std::string(plt_last_error()).find("highway") != std::string::npos);
  CHECK(plt_config_from_json("{", &cfg) == PLT_ERR_SCHEMA);
  CHECK(plt_results_row_count(nullptr) == 0);
  plt_config_free(nullptr);
  plt_results_free(nullptr);
}

TEST_CASE("configuration handles round-trip") {
  plt_config* cfg = nullptr;
  REQUIRE(plt_config_preset("default", &cfg) == PLT_OK);
  CHECK(plt_config_set_seed(cfg, 77) == PLT_OK);
  uint64_t seed = 0;
  CHECK(plt_config_get_seed(cfg, &seed) == PLT_OK);
  CHECK(seed == 77);
  char* text = nullptr;
  REQUIRE(plt_config_to_json(cfg, &text) == PLT_OK);
  plt_config* back = nullptr;
  CHECK(plt_config_from_json(text, &back) == PLT_OK);
  char* again = nullptr;
  REQUIRE(plt_config_to_json(back, &again) == PLT_OK);
  CHECK(std::string(text) == std::string(again));
  plt_string_free(text);
  plt_string_free(again);
  plt_config_free(back);
  plt_config_free(cfg);
}

TEST_CASE("experiments run through the C interface") {
  plt_config* cfg = small_config();
  plt_experiment* exp = nullptr;
  CHECK(plt_experiment_create(cfg, "dilus,kalman", &exp) == PLT_ERR_INVALID_ARGUMENT);
  REQUIRE(plt_experiment_create(cfg, "dilus,lasso", &exp) == PLT_OK);
  const uint64_t seeds[] = {4};
  CHECK(plt_experiment_set_seeds(exp, seeds, 1) == PLT_OK);
  CHECK(plt_experiment_set_threads(exp, 1) == PLT_OK);
  CHECK(plt_experiment_set_sweep(exp, "colour", nullptr, 0) == PLT_ERR_INVALID_ARGUMENT);

  plt_results* res = nullptr;
  REQUIRE(plt_run(exp, &res) == PLT_OK);
  REQUIRE(plt_results_row_count(res) == 4);
  plt_row row{};
  CHECK(plt_results_row(res, 0, &row) == PLT_OK);
  CHECK(std::string(row.method) == "dilus");
  CHECK(row.ok == 1);
  CHECK(row.vue_count == 1);
  CHECK(plt_results_row(res, 4, &row) == PLT_ERR_OUT_OF_RANGE);
  size_t q = 0;
  CHECK(plt_results_q_hat(res, 0, 0, &q) == PLT_OK);
  CHECK(plt_results_q_hat(res, 0, 1, &q) == PLT_ERR_OUT_OF_RANGE);
  double rmse = -1.0;
  CHECK(plt_results_rmse(res, "lasso", 0.0, &rmse) == PLT_OK);
  CHECK(rmse >= 0.0);
  CHECK(plt_results_rmse(res, "map", 0.0, &rmse) != PLT_OK);
  char* csv = nullptr;
  REQUIRE(plt_results_csv(res, &csv) == PLT_OK);
  CHECK(std::string(csv).rfind("method,", 0) == 0);
  plt_string_free(csv);
  CHECK(plt_results_seconds(res) >= 0.0);

  plt_results_free(res);
  plt_experiment_free(exp);
  plt_config_free(cfg);
}

TEST_CASE("GDOP maps through the C interface") {
  plt_config* cfg = nullptr;
  REQUIRE(plt_config_preset("default", &cfg) == PLT_OK);
  const plt_raster r = plt_default_raster();
  CHECK(r.step == 5.0);
  plt_gdop* map = nullptr;
  CHECK(plt_gdop_map(cfg, &r, "BS,LIDAR", 1.0, &map) == PLT_ERR_INVALID_ARGUMENT);
  REQUIRE(plt_gdop_map(cfg, &r, "BS,BS+RIS", 0.0, &map) == PLT_OK);
  CHECK(plt_gdop_point_count(map) == 41 * 25);
  CHECK(plt_gdop_deployment_count(map) == 2);
  double x = 0, y = 0, bs = 0, both = 0;
  REQUIRE(plt_gdop_value(map, 100, 0, &x, &y, &bs) == PLT_OK);
  REQUIRE(plt_gdop_value(map, 100, 1, &x, &y, &both) == PLT_OK);
  CHECK(both <= bs);
  CHECK(plt_gdop_value(map, 41 * 25, 0, &x, &y, &bs) == PLT_ERR_OUT_OF_RANGE);
  const auto path = std::filesystem::temp_directory_path() / "platoon_capi_gdop.csv";
  CHECK(plt_gdop_write_csv(map, path.string().c_str()) == PLT_OK);
  CHECK(std::filesystem::exists(path));
  std::filesystem::remove(path);
  plt_gdop_free(map);
  plt_config_free(cfg);
}

TEST_CASE("self-tests are exposed") {
  plt_selftest* st = nullptr;
  REQUIRE(plt_selftest_run(1, &st) == PLT_OK);
  REQUIRE(plt_selftest_count(st) > 0);
  for (size_t i = 0; i < plt_selftest_count(st); ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int pass = 0;
    double secs = 0.0;
    REQUIRE(plt_selftest_result(st, i, &name, &pass, &detail, &secs) == PLT_OK);
    INFO(name << ": " << detail);
    CHECK(pass == 1);
  }
  const char* name = nullptr;
  int pass = 0;
  CHECK(plt_selftest_result(st, plt_selftest_count(st), &name, &pass, nullptr, nullptr) ==
        PLT_ERR_OUT_OF_RANGE);
  plt_selftest_free(st);
}
