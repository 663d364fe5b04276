#include "platoon/core/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "platoon/core/channel.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/gdop.hpp"
#include "platoon/core/priors.hpp"
#include "platoon/core/sensing.hpp"
#include "platoon/core/tracker.hpp"
#include "platoon/core/vbi.hpp"

namespace platoon {

namespace {

double deg(double d) { return d * kPi / 180.0; }

CMat random_complex(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = cd(n(rng), n(rng)) / std::sqrt(2.0);
  }
  return A;
}

double relative_error(const CMat& a, const CMat& b) {
  const double nb = b.norm();
  return nb > 0.0 ? (a - b).norm() / nb : (a - b).norm();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  body(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

GdopCheck gdop_check() {
  GdopCheck c;
  for (double g : {1e-6, 0.37, 1.0, 3.5, 1234.5}) {
    c.half_error = std::max(c.half_error, std::abs(gdop_combined(g, g) - g / 2.0));
  }
  ScenarioConfig cfg;
  const double pl = ris_bs_gain_magnitude(scene_ris_bs_channel(cfg, cfg.seed));
  const GdopReport rep =
      gdop_map(cfg, GdopRaster{}, {GdopDeployment::Bs, GdopDeployment::BsRis}, pl);
  c.raster_points = rep.points.size();
  for (Eigen::Index i = 0; i < rep.values.rows(); ++i) {
    if (rep.values(i, 1) > rep.values(i, 0)) ++c.combined_violations;
  }
  const double omega = deg(23.0), sigma = 1e-5, fc = 7e9;
  for (double zeta : {2.0, 2.5, 3.0}) {
    const double a = gdop_ula(omega, 40.0, sigma, 16, fc, zeta);
    const double b = gdop_ula(omega, 80.0, sigma, 16, fc, zeta);
    c.exponent_error = std::max(c.exponent_error, std::abs(std::log(b / a) / std::log(2.0) - (1.0 + zeta)));
  }
  const double k8 = gdop_ula(omega, 40.0, sigma, 8, fc, 3.0);
  const double k32 = gdop_ula(omega, 40.0, sigma, 32, fc, 3.0);
  c.exponent_error = std::max(c.exponent_error, std::abs(std::log(k32 / k8) / std::log(4.0) + 1.5));
  const double s1 = gdop_ula(omega, 40.0, 1e-5, 16, fc, 3.0);
  const double s2 = gdop_ula(omega, 40.0, 3e-5, 16, fc, 3.0);
  c.exponent_error = std::max(c.exponent_error, std::abs(std::log(s2 / s1) / std::log(3.0) - 1.0));
  return c;
}

double fim_oracle_error() {
  double worst = 0.0;
  const double gain = 0.7, sigma2 = 0.3;
  for (std::size_t K : {2u, 8u, 16u}) {
    for (int d = -70; d <= 70; d += 5) {
      const double omega = deg(static_cast<double>(d));
      auto mean_map = [&](const RVec& p) -> CVec { return gain * steering_ula_broadside(p(0), K); };
      const RMat J = fim_numeric_oracle(mean_map, RVec::Constant(1, omega), sigma2);
      const double closed = fim_aoa_ula(omega, gain, sigma2, K);
      worst = std::max(worst, std::abs(J(0, 0) - closed) / closed);
    }
  }
  return worst;
}

double cascaded_median_deviation(std::uint64_t seed, std::size_t draws) {
  ScenarioConfig cfg;
  cfg.K = 64;
  cfg.N_h = 8;
  cfg.N_v = 8;
  cfg.G = 32;
  const Deployment dep = make_deployment(cfg);
  Rng rng = make_stream(seed, 11);
  std::uniform_real_distribution<double> ang(deg(-60.0), deg(60.0));
  std::vector<double> dev;
  const double sigma2 = 1.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const CMat H = synthesize_ris_bs_channel(cfg, dep, rng);
    const RisProfile ris = random_ris_profile(cfg.N(), cfg.G, rng);
    const double phi = ang(rng), theta = ang(rng);
    auto mean_map = [&](const RVec& p) -> CVec {
      const CVec a = steering_upa_broadside(p(0), theta, cfg.N_h, cfg.N_v);
      CVec y(static_cast<Eigen::Index>(cfg.K * cfg.G));
      for (std::size_t g = 0; g < cfg.G; ++g) {
        y.segment(static_cast<Eigen::Index>(g * cfg.K), static_cast<Eigen::Index>(cfg.K)) =
            H * ris.at(g).cwiseProduct(a);
      }
      return y;
    };
    const double numeric = fim_numeric_oracle(mean_map, RVec::Constant(1, phi), sigma2)(0, 0);
    const double closed = static_cast<double>(cfg.G) *
                          fim_ris_cascaded(phi, 1.0, sigma2, cfg.N_h, cfg.N_v, cfg.K, ris_bs_gain_magnitude(H));
    dev.push_back(std::abs(numeric - closed) / closed);
  }
  std::sort(dev.begin(), dev.end());
  const std::size_t n = dev.size();
  return n % 2 == 1 ? dev[n / 2] : 0.5 * (dev[n / 2 - 1] + dev[n / 2]);
}

ConjugacyCheck conjugacy_check(std::uint64_t seed) {
  Rng rng = make_stream(seed, 12);
  LinearModel model;
  model.M = 1;
  model.U = 2;
  model.F_R = random_complex(8, 2, rng);
  model.F_B = random_complex(8, 2, rng);
  model.Xi = CMat(8, 0);
  model.y = random_complex(8, 1, rng).col(0);
  model.prepare();

  const RVec prec_R = (RVec(2) << 0.8, 2.5).finished();
  const RVec prec_B = (RVec(2) << 1.7, 0.4).finished();
  const double kappa = 3.0;

  CMat A(8, 4);
  A << model.F_R, model.F_B;
  RVec prec(4);
  prec << prec_R, prec_B;
  CMat P = kappa * A.adjoint() * A;
  P.diagonal() += prec.cast<cd>();
  const CMat cov = P.inverse();
  const CVec mean = kappa * cov * A.adjoint() * model.y;

  Hyperparams hyper;
  VbiOptions opt;
  opt.structured = false;
  opt.learn_precisions = false;
  opt.learn_noise = false;
  opt.tol = 1e-14;
  opt.max_sweeps = 100000;
  const RMat q0 = RMat::Constant(1, 2, 0.5);
  PosteriorSet warm = initial_posteriors(model, q0, RVec(0), hyper, opt);
  warm.rho_R = {prec_R, RVec::Ones(2)};
  warm.rho_B = {prec_B, RVec::Ones(2)};
  warm.kappa = {RVec::Constant(1, kappa), RVec::Ones(1)};
  const RMat spatial = RMat::Constant(2, 2, 0.5);

  ConjugacyCheck c;
  opt.joint = true;
  const EStepResult joint = e_step(model, q0, RVec(0), spatial, hyper, opt, warm);
  const CVec jm = joint.post.stacked_mean();
  c.joint_mean_error = relative_error(jm.head(4), mean);
  c.joint_cov_error = relative_error(joint.post.joint_cov.topLeftCorner(4, 4), cov);

  opt.joint = false;
  const EStepResult blocks = e_step(model, q0, RVec(0), spatial, hyper, opt, warm);
  c.blockwise_mean_error = relative_error(blocks.post.stacked_mean().head(4), mean);
  return c;
}

double chain_marginal_error(std::uint64_t seed, std::size_t instances) {
  Rng rng = make_stream(seed, 13);
  std::uniform_int_distribution<int> u_dist(1, 5), m_dist(1, 4);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t it = 0; it < instances; ++it) {
    const auto U = static_cast<Eigen::Index>(u_dist(rng));
    const auto M = static_cast<Eigen::Index>(m_dist(rng));
    RMat nu_in(M, U), temporal(M, U), spatial(U, U);
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index j = 0; j < U; ++j) {
        nu_in(i, j) = 0.05 + w(rng);
        temporal(i, j) = 0.05 + w(rng);
      }
      temporal.row(i) /= temporal.row(i).sum();
    }
    for (Eigen::Index i = 0; i < U; ++i) {
      for (Eigen::Index j = 0; j < U; ++j) spatial(i, j) = w(rng) < 0.2 ? 0.0 : w(rng);
      if (spatial.row(i).sum() == 0.0) spatial(i, i) = 1.0;
    }
    const MessageSet msg = forward_backward_q(nu_in, spatial, temporal);

    RMat exact = RMat::Zero(M, U);
    std::size_t states = 1;
    for (Eigen::Index m = 0; m < M; ++m) states *= static_cast<std::size_t>(U);
    std::vector<Eigen::Index> q(static_cast<std::size_t>(M));
    for (std::size_t s = 0; s < states; ++s) {
      std::size_t rest = s;
      for (Eigen::Index m = 0; m < M; ++m) {
        q[static_cast<std::size_t>(m)] = static_cast<Eigen::Index>(rest % static_cast<std::size_t>(U));
        rest /= static_cast<std::size_t>(U);
      }
      double p = 1.0;
      for (Eigen::Index m = 0; m < M; ++m) {
        const Eigen::Index qm = q[static_cast<std::size_t>(m)];
        p *= nu_in(m, qm) * temporal(m, qm);
        if (m + 1 < M) p *= spatial(qm, q[static_cast<std::size_t>(m + 1)]);
      }
      for (Eigen::Index m = 0; m < M; ++m) exact(m, q[static_cast<std::size_t>(m)]) += p;
    }
    for (Eigen::Index m = 0; m < M; ++m) {
      const double total = exact.row(m).sum();
      if (total <= 0.0) continue;
      exact.row(m) /= total;
      RVec mp = nu_in.row(m).transpose().cwiseProduct(msg.nu_out.row(m).transpose());
      mp /= mp.sum();
      worst = std::max(worst, (mp - exact.row(m).transpose()).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double sensing_residual(std::uint64_t seed, std::size_t scenes) {
  ScenarioConfig cfg = preset_config("desk");
  cfg.T = 1;
  double worst = 0.0;
  for (std::size_t s = 0; s < scenes; ++s) {
    cfg.use_ris = s % 4 != 3;
    const Scene sc = simulate_scene(cfg, seed + s);
    Rng silent = make_stream(seed + s, 99);
    const CVec y = received_signal(sc.channels[0], sc.H_rb, sc.ris, sc.pilots, cfg.use_ris, 0.0, silent);
    const SparseTruth truth = ground_truth_sparse(sc.traj, 0, sc.channels[0], sc.grid, cfg.use_ris);
    const SensingMatrices mats =
        build_sensing_matrices(sc.grid, sc.dep, truth.offsets, sc.ris, sc.pilots, sc.H_rb);
    const CVec model = mats.F * truth.z + mats.Xi * truth.v;
    worst = std::max(worst, (y - model).norm() / y.norm());
  }
  return worst;
}

SurrogateCheck surrogate_check(std::uint64_t seed, std::size_t armijo_steps) {
  SurrogateCheck c;
  ScenarioConfig cfg = preset_config("desk");
  cfg.T = 1;
  cfg.G = 8;
  const Scene sc = simulate_scene(cfg, seed);
  const SensingBuilder builder(sc.grid, sc.dep, sc.pilots, sc.ris, sc.H_rb);
  const BlockScales scales = dictionary_scales(builder);
  const OffsetEstimate zero = OffsetEstimate::zeros(cfg.M, sc.grid);
  const LinearModel model = normalized_model(builder, scales, sc.y[0], zero);
  const SlotPriors pri = cross_slot_priors(std::nullopt, std::nullopt, temporal_kernel(cfg),
                                           nlos_activity_rate(cfg, true), cfg.nlos.corr, cfg.M);
  VbiOptions vopt;
  vopt.tol = cfg.algo.vbi_tol;
  vopt.max_sweeps = cfg.algo.vbi_max_sweeps;
  const EStepResult es =
      e_step(model, pri.q, pri.c, spatial_kernel(cfg.platoon, cfg.U), cfg.hyper, vopt);
  const std::vector<OffsetCoord> coords =
      select_coordinates(es.post, builder.layout(), sc.grid, cfg.algo.top_p, 1);
  const Surrogate sur(builder, scales, model, es.post, zero);
  const auto n = static_cast<Eigen::Index>(coords.size());
  RVec bound(n);
  for (Eigen::Index i = 0; i < n; ++i) bound(i) = coords[static_cast<std::size_t>(i)].bound;
  auto f = [&](const RVec& x) { return sur.value_at(coords, x); };
  auto g = [&](const RVec& x) { return sur.gradient(coords, x); };

  Rng rng = make_stream(seed, 14);
  std::uniform_real_distribution<double> unit(-0.8, 0.8);
  auto random_point = [&]() {
    RVec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = unit(rng) * bound(i);
    return x;
  };
  for (int trial = 0; trial < 5; ++trial) {
    const RVec x = random_point();
    const RVec gh = g(x);
    RVec g10(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6 * bound(i);
      RVec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      g10(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    c.fd_error = std::max(c.fd_error, (gh - g10).norm() / std::max(g10.norm(), 1e-300));
  }

  RVec x = random_point();
  for (std::size_t s = 0; s < armijo_steps; ++s) {
    const ArmijoResult ar = armijo_ascent(f, g, x, bound, cfg.algo.armijo);
    ++c.armijo_steps;
    if (ar.f_end < ar.f_start) ++c.armijo_violations;
    x = ar.moved && s % 8 != 7 ? ar.x : random_point();
  }

  const RVec a = (RVec(4) << 0.6, 1.0, 1.9, 3.1).finished();
  const RVec center = (RVec(4) << 0.21, -0.37, 0.05, 0.44).finished();
  const RVec qbound = RVec::Constant(4, 0.5);
  auto qf = [&](const RVec& v) { return -(a.array() * (v - center).array().square()).sum(); };
  auto qg = [&](const RVec& v) { return RVec(-2.0 * a.cwiseProduct(v - center)); };
  ArmijoParams fine = cfg.algo.armijo;
  fine.max_backtracks = 60;
  const MStepResult ms = m_step(qf, qg, RVec::Zero(4), qbound, fine, 100000);
  c.vertex_error = (ms.x - center).lpNorm<Eigen::Infinity>();
  return c;
}

std::vector<CheckResult> run_selftests(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(timed("gdop closed forms", [&](CheckResult& r) {
    const GdopCheck c = gdop_check();
    r.pass = c.half_error == 0.0 && c.combined_violations == 0 && c.exponent_error <= 1e-12;
    r.detail = "half error " + fmt(c.half_error) + ", BS+RIS above BS at " +
               std::to_string(c.combined_violations) + "/" + std::to_string(c.raster_points) +
               " points, exponent error " + fmt(c.exponent_error);
  }));
  out.push_back(timed("fim oracle", [&](CheckResult& r) {
    const double ula = fim_oracle_error();
    const double cas = cascaded_median_deviation(seed);
    r.pass = ula <= 1e-6 && cas <= 0.2;
    r.detail = "ULA max relative error " + fmt(ula) + ", cascaded median deviation " + fmt(cas);
  }));
  out.push_back(timed("conjugacy oracle", [&](CheckResult& r) {
    const ConjugacyCheck c = conjugacy_check(seed);
    const double worst = std::max({c.joint_mean_error, c.joint_cov_error, c.blockwise_mean_error});
    r.pass = worst <= 1e-6;
    r.detail = "mean " + fmt(c.joint_mean_error) + ", covariance " + fmt(c.joint_cov_error) +
               ", blockwise mean " + fmt(c.blockwise_mean_error);
  }));
  out.push_back(timed("chain marginal oracle", [&](CheckResult& r) {
    const double e = chain_marginal_error(seed);
    r.pass = e <= 1e-9;
    r.detail = "max abs error " + fmt(e);
  }));
  out.push_back(timed("sensing consistency", [&](CheckResult& r) {
    const double e = sensing_residual(seed);
    r.pass = e < 1e-9;
    r.detail = "max relative residual " + fmt(e);
  }));
  out.push_back(timed("surrogate and gradient", [&](CheckResult& r) {
    const SurrogateCheck c = surrogate_check(seed);
    r.pass = c.fd_error <= 1e-4 && c.armijo_violations == 0 && c.vertex_error <= 1e-6;
    r.detail = "fd h vs h/10 " + fmt(c.fd_error) + ", Armijo violations " +
               std::to_string(c.armijo_violations) + "/" + std::to_string(c.armijo_steps) +
               ", vertex error " + fmt(c.vertex_error);
  }));
  return out;
}

}  // namespace platoon
