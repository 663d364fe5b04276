#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "platoon/core/config.hpp"
#include "platoon/core/geometry.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream) pairs.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

struct Deployment {
  Position3 bs_position = Position3::Zero();
  Position3 ris_position = Position3::Zero();
  Direction3 bs_axis = Direction3::UnitX();
  ArrayFrame ris_frame{Direction3::UnitX(), Direction3::UnitZ(), Direction3::UnitY()};
  std::size_t K = 1;
  std::size_t N_h = 1;
  std::size_t N_v = 1;
  bool use_ris = true;

  std::size_t N() const { return N_h * N_v; }
};

Deployment make_deployment(const ScenarioConfig& cfg);
GridSpec make_scenario_grid(const ScenarioConfig& cfg);

struct PlatoonTrajectory {
  std::size_t T = 0;
  std::size_t M = 0;
  std::vector<std::vector<Position3>> position;     // [t][m]
  std::vector<std::vector<GridLocation>> location;  // [t][m]
  std::vector<std::vector<double>> speed;           // [t][m], m/s along the road
};

PlatoonTrajectory sample_platoon(const ScenarioConfig& cfg, const GridSpec& grid, Rng& rng);

struct RisProfile {
  // One phase vector per pilot, or a single vector reused for every pilot.
  std::vector<CVec> theta;

  const CVec& at(std::size_t g) const { return theta.size() == 1 ? theta.front() : theta[g]; }
};

RisProfile random_ris_profile(std::size_t N, std::size_t count, Rng& rng);

// Unit-modulus QPSK symbols scaled by amplitude; rows are VUEs, columns pilots.
CMat random_pilots(std::size_t M, std::size_t G, double amplitude, Rng& rng);

// LoS-dominant Rician BS-RIS channel, K x N.
CMat synthesize_ris_bs_channel(const ScenarioConfig& cfg, const Deployment& dep, Rng& rng);

// Mean column-gain magnitude ||H(:,n)|| / sqrt(K).
double ris_bs_gain_magnitude(const CMat& H_rb);

struct ChannelRealization {
  std::vector<CVec> h_b;  // per VUE, length K
  std::vector<CVec> h_r;  // per VUE, length N
  CVec beta;              // LoS gains to the BS
  CVec eta;               // LoS gains to the RIS
  BMat support_bs;        // M x K~
  BMat support_ris;       // M x N~
  CMat nlos_gain_bs;      // zero where inactive
  CMat nlos_gain_ris;
  RMat nlos_offset_bs;
  RMat nlos_offset_phi;
  RMat nlos_offset_theta;
};

double carrier_wavelength(const ScenarioConfig& cfg);

// Complex LoS gain g0 * d^-zeta * exp(j 2 pi d / lambda).
cd los_gain(double g0, double distance, double zeta, double wavelength);

// NLoS path-gain variances (absolute), resolving the relative default.
double nlos_variance_bs(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep);
double nlos_variance_ris(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep);

// Holds the NLoS support chains; call synthesize for t = 0, 1, 2, ... in order.
class ChannelSynthesizer {
 public:
  ChannelSynthesizer(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep);

  ChannelRealization synthesize(const PlatoonTrajectory& traj, std::size_t t, Rng& rng);

 private:
  void start(Rng& rng);
  void evolve(Rng& rng);

  ScenarioConfig cfg_;
  GridSpec grid_;
  Deployment dep_;
  double var_bs_ = 0.0;
  double var_ris_ = 0.0;
  std::size_t next_slot_ = 0;
  BMat support_bs_;
  BMat support_ris_;
  CMat gain_bs_;
  CMat gain_ris_;
  RMat off_bs_;
  RMat off_phi_;
  RMat off_theta_;
};

// y(g) = sum_m (H_rb Theta_g h_{m,r} + h_{m,b}) x_m(g) + n(g), stacked over g.
CVec received_signal(const ChannelRealization& ch, const CMat& H_rb, const RisProfile& ris,
                     const CMat& pilots, bool use_ris, double noise_power, Rng& noise_rng);

// Everything one Monte-Carlo realization needs, generated from a single seed.
struct Scene {
  ScenarioConfig cfg;
  GridSpec grid;
  Deployment dep;
  CMat pilots;
  RisProfile ris;
  CMat H_rb;
  PlatoonTrajectory traj;
  std::vector<ChannelRealization> channels;
  std::vector<CVec> y;
};

Scene simulate_scene(const ScenarioConfig& cfg, std::uint64_t seed);

// The BS-RIS channel simulate_scene draws for this seed.
CMat scene_ris_bs_channel(const ScenarioConfig& cfg, std::uint64_t seed);

}  // namespace platoon
