#include "platoon/core/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "platoon/core/error.hpp"

namespace platoon {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

cd complex_normal(double variance, Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state))};
  return Rng(seq);
}

Deployment make_deployment(const ScenarioConfig& cfg) {
  Deployment d;
  d.bs_position = cfg.bs_position;
  d.ris_position = cfg.ris_position;
  d.K = cfg.K;
  d.N_h = cfg.N_h;
  d.N_v = cfg.N_v;
  d.use_ris = cfg.use_ris;
  // The RIS faces the road: the road side is +y when the RIS sits below the road line.
  const double side = cfg.road_y >= cfg.ris_position.y() ? 1.0 : -1.0;
  d.ris_frame = {Direction3::UnitX(), Direction3::UnitZ(), side * Direction3::UnitY()};
  return d;
}

GridSpec make_scenario_grid(const ScenarioConfig& cfg) {
  return make_grid(Position3(cfg.road_x_start, cfg.road_y, 0.0), Direction3::UnitX(), cfg.U,
                   cfg.grid_length, cfg.bs_grid, cfg.ris_grid_h, cfg.ris_grid_v);
}

PlatoonTrajectory sample_platoon(const ScenarioConfig& cfg, const GridSpec& grid, Rng& rng) {
  const std::size_t M = cfg.M;
  const std::size_t T = cfg.T;
  const double dL = grid.delta_L;
  const double q0 = static_cast<double>(cfg.platoon.min_gap);
  const double min_gap = q0 * dL * (1.0 + 1e-9);

  std::gamma_distribution<double> spacing(cfg.platoon.shape, cfg.platoon.scale);
  std::vector<double> a(M, 0.0);
  for (std::size_t m = 1; m < M; ++m) a[m] = a[m - 1] + (q0 + spacing(rng)) * dL;

  const double span = a[M - 1];
  const double drift = cfg.platoon.mean_speed * cfg.slot_interval * static_cast<double>(T - 1);
  const double road = static_cast<double>(grid.U - 1) * dL;
  const double start = (road - span - std::abs(drift)) / 2.0 - std::min(0.0, drift);
  for (double& x : a) x += start;

  PlatoonTrajectory traj;
  traj.T = T;
  traj.M = M;
  std::normal_distribution<double> common(cfg.platoon.mean_speed, cfg.platoon.speed_std);
  std::normal_distribution<double> jitter(0.0, cfg.platoon.speed_jitter);

  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) {
      const double v = common(rng);
      std::vector<double> speed(M);
      for (std::size_t m = 0; m < M; ++m) {
        speed[m] = v + (cfg.platoon.speed_jitter > 0.0 ? jitter(rng) : 0.0);
        a[m] += speed[m] * cfg.slot_interval;
      }
      for (std::size_t m = 1; m < M; ++m) a[m] = std::max(a[m], a[m - 1] + min_gap);
      traj.speed.push_back(std::move(speed));
    }
    std::vector<Position3> pos(M);
    std::vector<GridLocation> loc(M);
    for (std::size_t m = 0; m < M; ++m) {
      if (a[m] < -dL / 2.0 || a[m] > road + dL / 2.0) {
        fail(ErrorCode::TrajectoryOverflow, "platoon left the road grid at slot " +
                                                std::to_string(t));
      }
      pos[m] = grid.road_origin + a[m] * grid.road_direction;
      loc[m] = nearest_grid(pos[m], grid);
    }
    traj.position.push_back(std::move(pos));
    traj.location.push_back(std::move(loc));
  }
  return traj;
}

RisProfile random_ris_profile(std::size_t N, std::size_t count, Rng& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  RisProfile r;
  for (std::size_t g = 0; g < count; ++g) {
    CVec th(static_cast<Eigen::Index>(N));
    for (Eigen::Index n = 0; n < th.size(); ++n) th(n) = std::polar(1.0, phase(rng));
    r.theta.push_back(std::move(th));
  }
  return r;
}

CMat random_pilots(std::size_t M, std::size_t G, double amplitude, Rng& rng) {
  std::uniform_int_distribution<int> symbol(0, 3);
  CMat x(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(G));
  for (Eigen::Index g = 0; g < x.cols(); ++g) {
    for (Eigen::Index m = 0; m < x.rows(); ++m) {
      x(m, g) = std::polar(amplitude, kPi / 4.0 + kPi / 2.0 * symbol(rng));
    }
  }
  return x;
}

double carrier_wavelength(const ScenarioConfig& cfg) { return kSpeedOfLight / cfg.carrier_hz; }

cd los_gain(double g0, double distance, double zeta, double wavelength) {
  return std::polar(g0 * std::pow(distance, -zeta), 2.0 * kPi * distance / wavelength);
}

CMat synthesize_ris_bs_channel(const ScenarioConfig& cfg, const Deployment& dep, Rng& rng) {
  const double d = (dep.ris_position - dep.bs_position).norm();
  const cd pl = los_gain(cfg.rb_gain0(), d, cfg.zeta_rb, carrier_wavelength(cfg));
  const CVec a_bs = steering_ula(ula_angle(dep.ris_position, dep.bs_position, dep.bs_axis), dep.K);
  const UpaAngles at_ris = upa_angles(dep.bs_position, dep.ris_position, dep.ris_frame);
  const CVec a_ris = steering_upa(at_ris.phi, at_ris.theta, dep.N_h, dep.N_v);
  const double kf = std::pow(10.0, cfg.rb_rician_k_db / 10.0);
  CMat H = std::sqrt(kf / (kf + 1.0)) * pl * (a_bs * a_ris.transpose());
  const double scatter = std::norm(pl) / (kf + 1.0);
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    for (Eigen::Index i = 0; i < H.rows(); ++i) H(i, j) += complex_normal(scatter, rng);
  }
  return H;
}

double ris_bs_gain_magnitude(const CMat& H_rb) {
  if (H_rb.size() == 0) return 0.0;
  return H_rb.colwise().norm().mean() / std::sqrt(static_cast<double>(H_rb.rows()));
}

namespace {

Position3 road_center(const GridSpec& grid) {
  return grid.road_origin +
         grid.delta_L * static_cast<double>(grid.U - 1) / 2.0 * grid.road_direction;
}

}  // namespace

double nlos_variance_bs(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep) {
  if (cfg.nlos.var_bs) return *cfg.nlos.var_bs;
  const double d = (road_center(grid) - dep.bs_position).norm();
  const double los = std::pow(cfg.bs_gain0() * std::pow(d, -cfg.zeta_bs), 2.0);
  return los * std::pow(10.0, cfg.nlos.rel_power_db / 10.0);
}

double nlos_variance_ris(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep) {
  if (cfg.nlos.var_ris) return *cfg.nlos.var_ris;
  const double d = (road_center(grid) - dep.ris_position).norm();
  const double los = std::pow(cfg.ris_gain0() * std::pow(d, -cfg.zeta_ris), 2.0);
  return los * std::pow(10.0, cfg.nlos.rel_power_db / 10.0);
}

ChannelSynthesizer::ChannelSynthesizer(const ScenarioConfig& cfg, const GridSpec& grid,
                                       const Deployment& dep)
    : cfg_(cfg), grid_(grid), dep_(dep) {
  var_bs_ = nlos_variance_bs(cfg, grid, dep);
  var_ris_ = nlos_variance_ris(cfg, grid, dep);
  const auto M = static_cast<Eigen::Index>(cfg.M);
  const auto Kt = static_cast<Eigen::Index>(grid.bs_grid_size());
  const auto Nt = static_cast<Eigen::Index>(grid.ris_grid_size());
  support_bs_ = BMat::Constant(M, Kt, false);
  support_ris_ = BMat::Constant(M, Nt, false);
  gain_bs_ = CMat::Zero(M, Kt);
  gain_ris_ = CMat::Zero(M, Nt);
  off_bs_ = RMat::Zero(M, Kt);
  off_phi_ = RMat::Zero(M, Nt);
  off_theta_ = RMat::Zero(M, Nt);
}

namespace {

struct Activation {
  double stay;
  double enter;
};

Activation activation(double rate, double corr) {
  return {corr + (1.0 - corr) * rate, (1.0 - corr) * rate};
}

}  // namespace

void ChannelSynthesizer::start(Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (Eigen::Index m = 0; m < support_bs_.rows(); ++m) {
    std::vector<std::size_t> idx(grid_.bs_grid_size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t l = 0; l < cfg_.nlos.paths_bs; ++l) {
      std::uniform_int_distribution<std::size_t> pick(l, idx.size() - 1);
      std::swap(idx[l], idx[pick(rng)]);
      const auto k = static_cast<Eigen::Index>(idx[l]);
      support_bs_(m, k) = true;
      gain_bs_(m, k) = complex_normal(var_bs_, rng);
      off_bs_(m, k) = unit(rng) * grid_.bs_aoa_halfwidth[idx[l]];
    }
    std::vector<std::size_t> jdx(grid_.ris_grid_size());
    std::iota(jdx.begin(), jdx.end(), 0);
    for (std::size_t l = 0; l < cfg_.nlos.paths_ris; ++l) {
      std::uniform_int_distribution<std::size_t> pick(l, jdx.size() - 1);
      std::swap(jdx[l], jdx[pick(rng)]);
      const std::size_t n = jdx[l];
      const auto nn = static_cast<Eigen::Index>(n);
      support_ris_(m, nn) = true;
      gain_ris_(m, nn) = complex_normal(var_ris_, rng);
      off_phi_(m, nn) = unit(rng) * grid_.ris_phi_halfwidth[grid_.ris_phi_index(n)];
      off_theta_(m, nn) = unit(rng) * grid_.ris_theta_halfwidth[grid_.ris_theta_index(n)];
    }
  }
}

void ChannelSynthesizer::evolve(Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double rho = cfg_.nlos.corr;
  const double innov = std::sqrt(1.0 - rho * rho);
  const Activation act_bs = activation(
      static_cast<double>(cfg_.nlos.paths_bs) / static_cast<double>(grid_.bs_grid_size()), rho);
  const Activation act_ris = activation(
      static_cast<double>(cfg_.nlos.paths_ris) / static_cast<double>(grid_.ris_grid_size()), rho);

  for (Eigen::Index m = 0; m < support_bs_.rows(); ++m) {
    for (Eigen::Index k = 0; k < support_bs_.cols(); ++k) {
      const bool was = support_bs_(m, k);
      const bool now = u01(rng) < (was ? act_bs.stay : act_bs.enter);
      const cd fresh = complex_normal(var_bs_, rng);
      const double off = unit(rng) * grid_.bs_aoa_halfwidth[static_cast<std::size_t>(k)];
      if (now && was) {
        gain_bs_(m, k) = rho * gain_bs_(m, k) + innov * fresh;
      } else if (now) {
        gain_bs_(m, k) = fresh;
        off_bs_(m, k) = off;
      } else {
        gain_bs_(m, k) = 0.0;
        off_bs_(m, k) = 0.0;
      }
      support_bs_(m, k) = now;
    }
    for (Eigen::Index n = 0; n < support_ris_.cols(); ++n) {
      const auto nn = static_cast<std::size_t>(n);
      const bool was = support_ris_(m, n);
      const bool now = u01(rng) < (was ? act_ris.stay : act_ris.enter);
      const cd fresh = complex_normal(var_ris_, rng);
      const double dphi = unit(rng) * grid_.ris_phi_halfwidth[grid_.ris_phi_index(nn)];
      const double dtheta = unit(rng) * grid_.ris_theta_halfwidth[grid_.ris_theta_index(nn)];
      if (now && was) {
        gain_ris_(m, n) = rho * gain_ris_(m, n) + innov * fresh;
      } else if (now) {
        gain_ris_(m, n) = fresh;
        off_phi_(m, n) = dphi;
        off_theta_(m, n) = dtheta;
      } else {
        gain_ris_(m, n) = 0.0;
        off_phi_(m, n) = 0.0;
        off_theta_(m, n) = 0.0;
      }
      support_ris_(m, n) = now;
    }
  }
}

ChannelRealization ChannelSynthesizer::synthesize(const PlatoonTrajectory& traj, std::size_t t,
                                                  Rng& rng) {
  if (t != next_slot_) fail(ErrorCode::InvalidArgument, "channel slots must be synthesized in order");
  if (t >= traj.T) fail(ErrorCode::InvalidArgument, "slot beyond the trajectory");
  if (t == 0) {
    start(rng);
  } else {
    evolve(rng);
  }
  ++next_slot_;

  const double lambda = carrier_wavelength(cfg_);
  ChannelRealization ch;
  const std::size_t M = cfg_.M;
  ch.beta = CVec(static_cast<Eigen::Index>(M));
  ch.eta = CVec(static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    const Position3& p = traj.position[t][m];
    const double d_b = (p - dep_.bs_position).norm();
    const double d_r = (p - dep_.ris_position).norm();
    ch.beta(mi) = los_gain(cfg_.bs_gain0(), d_b, cfg_.zeta_bs, lambda);
    ch.eta(mi) = los_gain(cfg_.ris_gain0(), d_r, cfg_.zeta_ris, lambda);

    CVec hb = ch.beta(mi) * steering_ula(ula_angle(p, dep_.bs_position, dep_.bs_axis), dep_.K);
    for (Eigen::Index k = 0; k < support_bs_.cols(); ++k) {
      if (!support_bs_(mi, k)) continue;
      hb += gain_bs_(mi, k) *
            steering_ula(grid_.bs_aoa_grid[static_cast<std::size_t>(k)] + off_bs_(mi, k), dep_.K);
    }
    const UpaAngles ang = upa_angles(p, dep_.ris_position, dep_.ris_frame);
    CVec hr = ch.eta(mi) * steering_upa(ang.phi, ang.theta, dep_.N_h, dep_.N_v);
    for (Eigen::Index n = 0; n < support_ris_.cols(); ++n) {
      if (!support_ris_(mi, n)) continue;
      const UpaAngles& gpt = grid_.ris_angle_grid[static_cast<std::size_t>(n)];
      hr += gain_ris_(mi, n) * steering_upa(gpt.phi + off_phi_(mi, n),
                                            gpt.theta + off_theta_(mi, n), dep_.N_h, dep_.N_v);
    }
    ch.h_b.push_back(std::move(hb));
    ch.h_r.push_back(std::move(hr));
  }
  ch.support_bs = support_bs_;
  ch.support_ris = support_ris_;
  ch.nlos_gain_bs = gain_bs_;
  ch.nlos_gain_ris = gain_ris_;
  ch.nlos_offset_bs = off_bs_;
  ch.nlos_offset_phi = off_phi_;
  ch.nlos_offset_theta = off_theta_;
  return ch;
}

CVec received_signal(const ChannelRealization& ch, const CMat& H_rb, const RisProfile& ris,
                     const CMat& pilots, bool use_ris, double noise_power, Rng& noise_rng) {
  const std::size_t M = ch.h_b.size();
  if (static_cast<std::size_t>(pilots.rows()) != M) {
    fail(ErrorCode::InvalidDimension, "pilot rows must equal the number of VUEs");
  }
  if (M == 0) fail(ErrorCode::InvalidDimension, "no VUE channels");
  const Eigen::Index K = ch.h_b.front().size();
  const Eigen::Index G = pilots.cols();
  if (use_ris) {
    if (H_rb.rows() != K || ch.h_r.size() != M || H_rb.cols() != ch.h_r.front().size()) {
      fail(ErrorCode::InvalidDimension, "RIS channel dimensions are inconsistent");
    }
    if (ris.theta.size() != 1 && ris.theta.size() != static_cast<std::size_t>(G)) {
      fail(ErrorCode::InvalidDimension, "RIS profile count must be 1 or G");
    }
  }
  CVec y = CVec::Zero(K * G);
  for (Eigen::Index g = 0; g < G; ++g) {
    CVec yg = CVec::Zero(K);
    for (std::size_t m = 0; m < M; ++m) {
      CVec h = ch.h_b[m];
      if (use_ris) {
        h += H_rb * ris.at(static_cast<std::size_t>(g)).cwiseProduct(ch.h_r[m]);
      }
      yg += pilots(static_cast<Eigen::Index>(m), g) * h;
    }
    y.segment(g * K, K) = yg;
  }
  if (noise_power > 0.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += complex_normal(noise_power, noise_rng);
  }
  return y;
}

Scene simulate_scene(const ScenarioConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  Scene s;
  s.cfg = cfg;
  s.grid = make_scenario_grid(cfg);
  s.dep = make_deployment(cfg);

  Rng fixed = make_stream(seed, 1);
  s.pilots = random_pilots(cfg.M, cfg.G, std::sqrt(cfg.tx_power_w()), fixed);
  s.ris = random_ris_profile(cfg.N(), cfg.ris_per_pilot ? cfg.G : 1, fixed);
  s.H_rb = synthesize_ris_bs_channel(cfg, s.dep, fixed);

  Rng motion = make_stream(seed, 2);
  s.traj = sample_platoon(cfg, s.grid, motion);

  Rng fading = make_stream(seed, 3);
  Rng noise = make_stream(seed, 4);
  ChannelSynthesizer synth(cfg, s.grid, s.dep);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    s.channels.push_back(synth.synthesize(s.traj, t, fading));
    s.y.push_back(received_signal(s.channels.back(), s.H_rb, s.ris, s.pilots, cfg.use_ris,
                                  cfg.noise_power_w(), noise));
  }
  return s;
}

CMat scene_ris_bs_channel(const ScenarioConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  Rng fixed = make_stream(seed, 1);
  (void)random_pilots(cfg.M, cfg.G, std::sqrt(cfg.tx_power_w()), fixed);
  (void)random_ris_profile(cfg.N(), cfg.ris_per_pilot ? cfg.G : 1, fixed);
  return synthesize_ris_bs_channel(cfg, make_deployment(cfg), fixed);
}

}  // namespace platoon
