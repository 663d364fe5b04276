#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <doctest.h>

#include "platoon/core/channel.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/error.hpp"
#include "platoon/core/types.hpp"

namespace platoon::test {

// Runs f and reports the error code it throws, or nothing when it returns.
inline bool throws_code(const std::function<void()>& f, ErrorCode code) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

inline double max_abs_diff(const CVec& a, const CVec& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Desk scenario with single-slot, line-of-sight-only defaults for fast oracle runs.
inline ScenarioConfig small_los_config(std::size_t M, std::size_t T = 1) {
  ScenarioConfig cfg = preset_config("desk");
  cfg.M = M;
  cfg.T = T;
  cfg.S = 1;
  cfg.nlos.paths_bs = 0;
  cfg.nlos.paths_ris = 0;
  return cfg;
}

// Scene whose VUEs sit exactly on the listed grid points in every slot, with a
// noiseless observation.
inline Scene on_grid_scene(const ScenarioConfig& cfg, const std::vector<std::size_t>& cells,
                           std::uint64_t seed) {
  Scene s = simulate_scene(cfg, seed);
  for (std::size_t t = 0; t < s.traj.T; ++t) {
    for (std::size_t m = 0; m < cfg.M; ++m) {
      s.traj.position[t][m] = s.grid.grid_points[cells[m]];
      s.traj.location[t][m] = {cells[m], 0.0};
    }
  }
  ChannelSynthesizer synth(cfg, s.grid, s.dep);
  Rng rng = make_stream(seed, 99);
  s.channels.clear();
  s.y.clear();
  for (std::size_t t = 0; t < s.traj.T; ++t) {
    s.channels.push_back(synth.synthesize(s.traj, t, rng));
    s.y.push_back(received_signal(s.channels.back(), s.H_rb, s.ris, s.pilots, s.dep.use_ris, 0.0, rng));
  }
  return s;
}

}  // namespace platoon::test
