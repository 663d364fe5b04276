#ifndef PLATOON_PLATOON_H
#define PLATOON_PLATOON_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PLT_BUILDING_LIBRARY)
#define PLT_API __declspec(dllexport)
#else
#define PLT_API __declspec(dllimport)
#endif
#else
#define PLT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum plt_status {
  PLT_OK = 0,
  PLT_ERR_INVALID_ARGUMENT = 1,
  PLT_ERR_INVALID_DIMENSION = 2,
  PLT_ERR_DEGENERATE_GEOMETRY = 3,
  PLT_ERR_OUT_OF_GRID = 4,
  PLT_ERR_INVALID_OFFSET = 5,
  PLT_ERR_TRAJECTORY_OVERFLOW = 6,
  PLT_ERR_NUMERICAL = 7,
  PLT_ERR_CONDITIONING = 8,
  PLT_ERR_DEGENERATE_POSTERIOR = 9,
  PLT_ERR_DEGENERATE_MESSAGE = 10,
  PLT_ERR_SEARCH_SPACE = 11,
  PLT_ERR_SCHEMA = 12,
  PLT_ERR_IO = 13,
  PLT_ERR_SHAPE_MISMATCH = 14,
  PLT_ERR_EMPTY_INPUT = 15,
  PLT_ERR_NULL_POINTER = 100,
  PLT_ERR_OUT_OF_RANGE = 101,
  PLT_ERR_INTERNAL = 102
} plt_status;

typedef struct plt_config plt_config;
typedef struct plt_experiment plt_experiment;
typedef struct plt_results plt_results;
typedef struct plt_gdop plt_gdop;
typedef struct plt_selftest plt_selftest;

/* Library version string, e.g. "1.0.0". */
PLT_API const char* plt_version(void);
/* Message of the last failed call on this thread; empty when none. */
PLT_API const char* plt_last_error(void);
PLT_API const char* plt_status_name(plt_status status);
/* Releases strings returned through char** out-parameters. */
PLT_API void plt_string_free(char* s);

/* Scenario configuration. Preset names: "default", "full", "desk". */
PLT_API plt_status plt_config_preset(const char* name, plt_config** out);
PLT_API plt_status plt_config_from_json(const char* json, plt_config** out);
PLT_API plt_status plt_config_to_json(const plt_config* cfg, char** out);
PLT_API plt_status plt_config_set_seed(plt_config* cfg, uint64_t seed);
PLT_API plt_status plt_config_get_seed(const plt_config* cfg, uint64_t* out);
PLT_API void plt_config_free(plt_config* cfg);

/* Experiment: a configuration plus methods, sweep, seeds and output directory.
   methods is a comma-separated list of dilus, no_offgrid, naive_vbi, lasso, map, bs_only. */
PLT_API plt_status plt_experiment_create(const plt_config* cfg, const char* methods,
                                         plt_experiment** out);
/* Accepts an experiment document or a bare scenario configuration. */
PLT_API plt_status plt_experiment_from_json(const char* json, plt_experiment** out);
PLT_API plt_status plt_experiment_to_json(const plt_experiment* exp, char** out);
PLT_API plt_status plt_experiment_set_methods(plt_experiment* exp, const char* methods);
PLT_API plt_status plt_experiment_set_config(plt_experiment* exp, const plt_config* cfg);
/* Copies the configuration held by the experiment into a new handle. */
PLT_API plt_status plt_experiment_get_config(const plt_experiment* exp, plt_config** out);
/* axis is one of none, N, nlos_paths, grid_length, slot_interval. */
PLT_API plt_status plt_experiment_set_sweep(plt_experiment* exp, const char* axis,
                                            const double* values, size_t count);
/* An empty list restores the default seeds cfg.seed + s for s < S. */
PLT_API plt_status plt_experiment_set_seeds(plt_experiment* exp, const uint64_t* seeds,
                                            size_t count);
/* NULL or "" disables file output. */
PLT_API plt_status plt_experiment_set_output(plt_experiment* exp, const char* dir);
/* 0 uses the hardware concurrency. */
PLT_API plt_status plt_experiment_set_threads(plt_experiment* exp, size_t threads);
PLT_API void plt_experiment_free(plt_experiment* exp);

/* Runs every (sweep value, seed, method) cell and writes the result files when
   an output directory is set. Method failures are recorded per row. */
PLT_API plt_status plt_run(const plt_experiment* exp, plt_results** out);

typedef struct plt_row {
  const char* method; /* owned by the results handle */
  double sweep_value;
  uint64_t seed;
  size_t slot;
  size_t vue_count;
  double rmse;
  size_t iterations;
  int converged;
  int ok; /* 0 when the method failed for this cell */
} plt_row;

PLT_API size_t plt_results_row_count(const plt_results* res);
PLT_API plt_status plt_results_row(const plt_results* res, size_t index, plt_row* out);
/* Estimated grid index of VUE m in row index. */
PLT_API plt_status plt_results_q_hat(const plt_results* res, size_t index, size_t m, size_t* out);
PLT_API plt_status plt_results_csv(const plt_results* res, char** out);
/* RMSE over all successful rows of a method at a sweep value (0 without a sweep). */
PLT_API plt_status plt_results_rmse(const plt_results* res, const char* method,
                                    double sweep_value, double* out);
PLT_API plt_status plt_results_converged_fraction(const plt_results* res, const char* method,
                                                  double sweep_value, double* out);
PLT_API double plt_results_seconds(const plt_results* res);
PLT_API void plt_results_free(plt_results* res);

typedef struct plt_raster {
  double x_min;
  double x_max;
  double y_min;
  double y_max;
  double step;
  double z;
} plt_raster;

/* Raster 0..200 x 0..120 m with 5 m steps at ground level. */
PLT_API plt_raster plt_default_raster(void);
/* deployments is a comma-separated list of BS, RIS, BS+RIS, BS+BS. A
   non-positive rb_gain uses the BS-RIS channel realized for the config seed. */
PLT_API plt_status plt_gdop_map(const plt_config* cfg, const plt_raster* raster,
                                const char* deployments, double rb_gain, plt_gdop** out);
PLT_API size_t plt_gdop_point_count(const plt_gdop* map);
PLT_API size_t plt_gdop_deployment_count(const plt_gdop* map);
PLT_API plt_status plt_gdop_value(const plt_gdop* map, size_t point, size_t deployment,
                                  double* x, double* y, double* gdop);
PLT_API plt_status plt_gdop_write_csv(const plt_gdop* map, const char* path);
PLT_API void plt_gdop_free(plt_gdop* map);

/* Oracle and property checks with pinned tolerances. */
PLT_API plt_status plt_selftest_run(uint64_t seed, plt_selftest** out);
PLT_API size_t plt_selftest_count(const plt_selftest* st);
PLT_API plt_status plt_selftest_result(const plt_selftest* st, size_t index, const char** name,
                                       int* pass, const char** detail, double* seconds);
PLT_API void plt_selftest_free(plt_selftest* st);

#ifdef __cplusplus
}
#endif

#endif
