#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "platoon/core/types.hpp"

namespace platoon {

inline constexpr int kConfigSchemaVersion = 1;

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
  double mean() const { return shape / rate; }
  bool operator==(const GammaParams&) const = default;
};

struct BranchHyper {
  GammaParams active{1.0, 1.0};
  GammaParams inactive{1.0, 1e-6};
  bool operator==(const BranchHyper&) const = default;
};

struct Hyperparams {
  BranchHyper ris;
  BranchHyper bs;
  BranchHyper nlos;
  GammaParams noise{1e-6, 1e-6};
  // Flat prior used by the i.i.d. baseline.
  GammaParams iid{1e-6, 1e-6};
  bool operator==(const Hyperparams&) const = default;
};

struct PlatoonParams {
  double shape = 2.0;       // Gamma shape of the spacing beyond the minimum gap
  double scale = 1.5;       // Gamma scale, in cells
  std::size_t min_gap = 2;  // q0, in cells
  double mean_speed = -18.0;
  double speed_std = 8.0;
  double speed_jitter = 0.5;  // per-VUE deviation from the common platoon speed, m/s
  bool operator==(const PlatoonParams&) const = default;
};

struct NlosParams {
  std::size_t paths_bs = 2;
  std::size_t paths_ris = 2;
  // Absolute path-gain variances; when unset they follow rel_power_db below the
  // LoS power at the road center.
  std::optional<double> var_bs;
  std::optional<double> var_ris;
  double rel_power_db = -10.0;
  double corr = 0.3;
  bool operator==(const NlosParams&) const = default;
};

struct ArmijoParams {
  double initial_step = 1.0;
  double contraction = 0.5;
  double sufficient_increase = 1e-4;
  std::size_t max_backtracks = 20;
  bool operator==(const ArmijoParams&) const = default;
};

struct AlgoParams {
  std::size_t r_max = 30;
  double eps_mu_z = 1e-3;
  double eps_mu_v = 1e-3;
  double eps_sigma_z = 1e-3;
  double eps_sigma_v = 1e-3;
  ArmijoParams armijo;
  std::size_t ascent_steps = 3;
  std::size_t top_p = 3;
  std::size_t nlos_top = 0;
  bool cross_term = true;
  std::size_t vbi_max_sweeps = 100;
  double vbi_tol = 1e-4;
  double lasso_lambda_scale = 0.1;
  std::size_t lasso_max_iters = 5000;
  double lasso_tol = 1e-6;
  double map_state_cap = 1e6;
  // Road offsets per cell integrated by the grid search, at cell-centered sub-positions.
  std::size_t map_subcells = 1;
  bool operator==(const AlgoParams&) const = default;
};

struct ScenarioConfig {
  int schema_version = kConfigSchemaVersion;
  std::size_t M = 4;
  std::size_t K = 16;
  std::size_t N_h = 16;
  std::size_t N_v = 16;
  std::size_t U = 100;
  std::size_t T = 100;
  std::size_t S = 200;
  std::size_t G = 16;
  double grid_length = 1.0;
  double slot_interval = 0.1;
  double carrier_hz = 7e9;
  double noise_power_dbm = -100.0;
  double tx_power_dbm = 30.0;
  double zeta_bs = 3.0;
  double zeta_ris = 2.5;
  double zeta_rb = 2.0;
  // Amplitude gains at 1 m; unset means (c / (4 pi f_c))^zeta.
  std::optional<double> ref_gain_bs;
  std::optional<double> ref_gain_ris;
  std::optional<double> ref_gain_rb;
  double rb_rician_k_db = 10.0;
  Position3 bs_position{50.0, 100.0, 25.0};
  Position3 ris_position{150.0, 0.0, 25.0};
  double road_y = 50.0;
  double road_x_start = 50.0;
  bool use_ris = true;
  bool ris_per_pilot = true;
  std::size_t bs_grid = 16;
  std::size_t ris_grid_h = 16;
  std::size_t ris_grid_v = 16;
  PlatoonParams platoon;
  NlosParams nlos;
  Hyperparams hyper;
  AlgoParams algo;
  std::uint64_t seed = 1;

  std::size_t N() const { return N_h * N_v; }
  double noise_power_w() const;
  double tx_power_w() const;
  double bs_gain0() const;
  double ris_gain0() const;
  double rb_gain0() const;

  bool operator==(const ScenarioConfig&) const = default;
};

// Throws Schema errors naming the offending field.
void validate_config(const ScenarioConfig& cfg);

ScenarioConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ScenarioConfig& cfg);

// "full" is the full-scale scenario with T = 100 and S = 200, "desk" is the reduced scenario.
ScenarioConfig preset_config(const std::string& name);

// Sets the reference gains so the per-sample LoS SNR at the road center hits the
// targets; the BS-RIS link is normalized to unit gain.
void calibrate_reference_gains(ScenarioConfig& cfg, double snr_bs_db, double snr_ris_db);

// Path-loss reference amplitude (c / (4 pi f_c))^zeta.
double free_space_reference_gain(double carrier_hz, double zeta);

double dbm_to_watts(double dbm);

}  // namespace platoon
