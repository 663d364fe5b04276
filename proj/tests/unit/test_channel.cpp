#include <cmath>
#include <numeric>

#include <doctest.h>

#include "platoon/core/channel.hpp"
#include "platoon/core/sensing.hpp"
#include "test_support.hpp"

using namespace platoon;
using platoon::test::max_abs_diff;
using platoon::test::throws_code;

namespace {

ChannelRealization zero_channels(std::size_t M, std::size_t K, std::size_t N) {
  ChannelRealization ch;
  for (std::size_t m = 0; m < M; ++m) {
    ch.h_b.push_back(CVec::Zero(static_cast<Eigen::Index>(K)));
    ch.h_r.push_back(CVec::Zero(static_cast<Eigen::Index>(N)));
  }
  return ch;
}

}  // namespace

TEST_CASE("sampled platoons keep the minimum index gap") {
  ScenarioConfig cfg = preset_config("desk");
  cfg.M = 3;
  cfg.U = 60;
  cfg.road_x_start = 70.0;
  const GridSpec grid = make_scenario_grid(cfg);
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng = make_stream(seed, 2);
    const PlatoonTrajectory traj = sample_platoon(cfg, grid, rng);
    REQUIRE(traj.position.size() == cfg.T);
    for (std::size_t t = 0; t < cfg.T; ++t) {
      for (std::size_t m = 1; m < cfg.M; ++m) {
        CHECK(traj.location[t][m].index >= traj.location[t][m - 1].index + cfg.platoon.min_gap);
      }
      for (std::size_t m = 0; m < cfg.M; ++m) {
        const GridLocation& loc = traj.location[t][m];
        CHECK(loc.index < cfg.U);
        CHECK((grid.point(loc.index, loc.offset) - traj.position[t][m]).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("platoon drift follows the mean speed") {
  ScenarioConfig cfg;
  cfg.M = 1;
  cfg.U = 400;
  cfg.T = 40;
  cfg.road_x_start = -100.0;
  const GridSpec grid = make_scenario_grid(cfg);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    Rng rng = make_stream(seed, 2);
    const PlatoonTrajectory traj = sample_platoon(cfg, grid, rng);
    for (const auto& s : traj.speed) {
      sum += s[0] * cfg.slot_interval / cfg.grid_length;
      ++n;
    }
  }
  CHECK(sum / static_cast<double>(n) == doctest::Approx(-1.8).epsilon(0.05));
}

TEST_CASE("a platoon leaving the grid is reported") {
  ScenarioConfig cfg = preset_config("desk");
  cfg.T = 400;
  const GridSpec grid = make_scenario_grid(cfg);
  Rng rng = make_stream(1, 2);
  CHECK(throws_code([&] { sample_platoon(cfg, grid, rng); }, ErrorCode::TrajectoryOverflow));
}

TEST_CASE("line-of-sight gains follow the path-loss law") {
  const double g0 = 2.5e-3;
  CHECK(std::abs(los_gain(g0, 10.0, 3.0, 0.05)) == doctest::Approx(g0 * 1e-3).epsilon(1e-12));
  CHECK(std::abs(los_gain(g0, 4.0, 2.0, 0.05)) == doctest::Approx(g0 / 16.0).epsilon(1e-12));
}

TEST_CASE("channels without NLoS paths equal the line-of-sight term") {
  const ScenarioConfig cfg = test::small_los_config(2, 3);
  const Scene s = simulate_scene(cfg, 4);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    const ChannelRealization& ch = s.channels[t];
    CHECK(ch.support_bs.count() == 0);
    CHECK(ch.support_ris.count() == 0);
    for (std::size_t m = 0; m < cfg.M; ++m) {
      const Position3& p = s.traj.position[t][m];
      const auto mi = static_cast<Eigen::Index>(m);
      const CVec hb = ch.beta(mi) * steering_ula(ula_angle(p, s.dep.bs_position, s.dep.bs_axis), cfg.K);
      const UpaAngles a = upa_angles(p, s.dep.ris_position, s.dep.ris_frame);
      const CVec hr = ch.eta(mi) * steering_upa(a.phi, a.theta, cfg.N_h, cfg.N_v);
      CHECK(max_abs_diff(ch.h_b[m], hb) == 0.0);
      CHECK(max_abs_diff(ch.h_r[m], hr) == 0.0);
      const double d = (p - s.dep.bs_position).norm();
      CHECK(std::abs(ch.beta(mi)) == doctest::Approx(cfg.bs_gain0() * std::pow(d, -cfg.zeta_bs)));
    }
  }
}

TEST_CASE("supports hold the configured number of paths in the first slot") {
  ScenarioConfig cfg = preset_config("desk");
  cfg.nlos.paths_bs = 3;
  cfg.nlos.paths_ris = 2;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Scene s = simulate_scene(cfg, seed);
    for (Eigen::Index m = 0; m < static_cast<Eigen::Index>(cfg.M); ++m) {
      CHECK(s.channels[0].support_bs.row(m).count() == 3);
      CHECK(s.channels[0].support_ris.row(m).count() == 2);
    }
  }
}

TEST_CASE("NLoS gain variance matches its configured value") {
  ScenarioConfig cfg = preset_config("desk");
  cfg.T = 1;
  cfg.nlos.var_bs = 4e-6;
  cfg.nlos.var_ris = 9e-6;
  const GridSpec grid = make_scenario_grid(cfg);
  const Deployment dep = make_deployment(cfg);
  Rng motion = make_stream(1, 2);
  const PlatoonTrajectory traj = sample_platoon(cfg, grid, motion);
  double sum_b = 0.0, sum_r = 0.0;
  std::size_t nb = 0, nr = 0;
  Rng rng = make_stream(77, 3);
  while (nb < 10000) {
    ChannelSynthesizer synth(cfg, grid, dep);
    const ChannelRealization ch = synth.synthesize(traj, 0, rng);
    for (Eigen::Index i = 0; i < ch.nlos_gain_bs.size(); ++i) {
      if (!ch.support_bs.data()[i]) continue;
      sum_b += std::norm(ch.nlos_gain_bs.data()[i]);
      ++nb;
    }
    for (Eigen::Index i = 0; i < ch.nlos_gain_ris.size(); ++i) {
      if (!ch.support_ris.data()[i]) continue;
      sum_r += std::norm(ch.nlos_gain_ris.data()[i]);
      ++nr;
    }
  }
  CHECK(sum_b / static_cast<double>(nb) == doctest::Approx(4e-6).epsilon(0.05));
  CHECK(sum_r / static_cast<double>(nr) == doctest::Approx(9e-6).epsilon(0.05));
}

TEST_CASE("received_signal superposes the cascaded and direct links") {
  Rng rng = make_stream(5, 0);
  const std::size_t K = 4, N = 6;
  ChannelRealization ch = zero_channels(1, K, N);
  for (Eigen::Index k = 0; k < 4; ++k) ch.h_b[0](k) = cd(0.1 * static_cast<double>(k), -0.2);
  for (Eigen::Index n = 0; n < 6; ++n) ch.h_r[0](n) = cd(0.3, 0.05 * static_cast<double>(n));
  const CMat H = CMat::Random(4, 6);
  const RisProfile ris = random_ris_profile(N, 1, rng);
  const CMat x = CMat::Ones(1, 1);
  const CVec y = received_signal(ch, H, ris, x, true, 0.0, rng);
  const CVec expect = H * ris.at(0).asDiagonal() * ch.h_r[0] + ch.h_b[0];
  CHECK(max_abs_diff(y, expect) < 1e-14);

  const CMat bad = CMat::Ones(2, 1);
  CHECK(throws_code([&] { received_signal(ch, H, ris, bad, true, 0.0, rng); },
                    ErrorCode::InvalidDimension));
}

TEST_CASE("noise energy matches K G sigma^2") {
  Rng rng = make_stream(9, 0);
  const std::size_t K = 8, G = 4, N = 4;
  const ChannelRealization ch = zero_channels(2, K, N);
  const CMat H = CMat::Zero(8, 4);
  const RisProfile ris = random_ris_profile(N, 1, rng);
  const CMat x = random_pilots(2, G, 1.0, rng);
  const double sigma2 = 2.5;
  double energy = 0.0;
  for (int i = 0; i < 10000; ++i) energy += received_signal(ch, H, ris, x, true, sigma2, rng).squaredNorm();
  CHECK(energy / 10000.0 == doctest::Approx(static_cast<double>(K * G) * sigma2).epsilon(0.02));
}

TEST_CASE("pilots are unit-modulus QPSK symbols") {
  Rng rng = make_stream(2, 0);
  const CMat x = random_pilots(3, 16, 2.0, rng);
  CHECK(x.rows() == 3);
  CHECK(x.cols() == 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK(std::abs(x.data()[i]) == doctest::Approx(2.0));
    CHECK(std::abs(std::abs(x.data()[i].real()) - std::abs(x.data()[i].imag())) < 1e-12);
  }
  const RisProfile r = random_ris_profile(16, 5, rng);
  for (const CVec& th : r.theta) CHECK((th.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("sensing matrices have the documented layout") {
  const ScenarioConfig cfg = preset_config("desk");
  const Scene s = simulate_scene(cfg, 2);
  const OffsetEstimate zero = OffsetEstimate::zeros(cfg.M, s.grid);
  const SensingMatrices sm = build_sensing_matrices(s.grid, s.dep, zero, s.ris, s.pilots, s.H_rb);
  const auto KG = static_cast<Eigen::Index>(cfg.K * cfg.G);
  CHECK(sm.F.rows() == KG);
  CHECK(sm.F.cols() == static_cast<Eigen::Index>(2 * cfg.U * cfg.M));
  CHECK(sm.Xi.rows() == KG);
  CHECK(sm.Xi.cols() == static_cast<Eigen::Index>((cfg.bs_grid + cfg.ris_grid_h * cfg.ris_grid_v) * cfg.M));

  const std::size_t m = 1, u = 7;
  const Position3 p = s.grid.grid_points[u];
  const CVec a = steering_ula(ula_angle(p, s.dep.bs_position, s.dep.bs_axis), cfg.K);
  const CVec col = sm.F.col(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Bs, m, u)));
  for (std::size_t g = 0; g < cfg.G; ++g) {
    const CVec expect = s.pilots(1, static_cast<Eigen::Index>(g)) * a;
    CHECK(max_abs_diff(col.segment(static_cast<Eigen::Index>(g * cfg.K), static_cast<Eigen::Index>(cfg.K)),
                       expect) < 1e-12);
  }
  CHECK(col.norm() == doctest::Approx(std::sqrt(static_cast<double>(cfg.K * cfg.G)) *
                                      std::abs(s.pilots(1, 0))));

  const UpaAngles ang = upa_angles(p, s.dep.ris_position, s.dep.ris_frame);
  const CVec an = steering_upa(ang.phi, ang.theta, cfg.N_h, cfg.N_v);
  const CVec rcol = sm.F.col(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Ris, m, u)));
  const CVec expect0 = s.pilots(1, 0) * (s.H_rb * s.ris.at(0).asDiagonal() * an);
  CHECK(max_abs_diff(rcol.head(static_cast<Eigen::Index>(cfg.K)), expect0) < 1e-12);
}

TEST_CASE("offsets outside their bounds are rejected by the dictionary builder") {
  const ScenarioConfig cfg = preset_config("desk");
  const Scene s = simulate_scene(cfg, 2);
  OffsetEstimate o = OffsetEstimate::zeros(cfg.M, s.grid);
  o.delta_r(0, 3) = 0.6 * cfg.grid_length;
  CHECK(throws_code([&] { build_sensing_matrices(s.grid, s.dep, o, s.ris, s.pilots, s.H_rb); },
                    ErrorCode::InvalidOffset));
}

TEST_CASE("ground truth reproduces the noiseless observation") {
  const ScenarioConfig cfg = preset_config("desk");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Scene s = simulate_scene(cfg, seed);
    Rng quiet = make_stream(seed, 50);
    for (std::size_t t = 0; t < cfg.T; t += 7) {
      const SparseTruth truth = ground_truth_sparse(s.traj, t, s.channels[t], s.grid, true);
      const SensingMatrices sm =
          build_sensing_matrices(s.grid, s.dep, truth.offsets, s.ris, s.pilots, s.H_rb);
      const CVec y0 = received_signal(s.channels[t], s.H_rb, s.ris, s.pilots, true, 0.0, quiet);
      CHECK((y0 - sm.F * truth.z - sm.Xi * truth.v).norm() / y0.norm() < 1e-9);

      for (std::size_t m = 0; m < cfg.M; ++m) {
        const std::size_t q = s.traj.location[t][m].index;
        std::size_t nz_r = 0, nz_b = 0;
        for (std::size_t u = 0; u < cfg.U; ++u) {
          const bool r = truth.z(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Ris, m, u))) != cd(0.0);
          const bool b = truth.z(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Bs, m, u))) != cd(0.0);
          nz_r += r;
          nz_b += b;
          if (r || b) CHECK(u == q);
        }
        CHECK(nz_r == 1);
        CHECK(nz_b == 1);
        std::size_t nv = 0;
        for (std::size_t n = 0; n < sm.layout.ris_grid; ++n) {
          nv += truth.v(static_cast<Eigen::Index>(sm.layout.nlos_ris_col(m, n))) != cd(0.0);
        }
        CHECK(nv == static_cast<std::size_t>(s.channels[t].support_ris.row(static_cast<Eigen::Index>(m)).count()));
      }
    }
  }
}

TEST_CASE("scenes are reproducible from their seed") {
  const ScenarioConfig cfg = preset_config("desk");
  const Scene a = simulate_scene(cfg, 12);
  const Scene b = simulate_scene(cfg, 12);
  const Scene c = simulate_scene(cfg, 13);
  for (std::size_t t = 0; t < cfg.T; ++t) CHECK(a.y[t] == b.y[t]);
  CHECK(a.y[0] != c.y[0]);
  CHECK(scene_ris_bs_channel(cfg, 12) == a.H_rb);
}
