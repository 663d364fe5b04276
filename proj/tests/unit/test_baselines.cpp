#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <doctest.h>

#include "platoon/core/baselines.hpp"
#include "platoon/core/tracker.hpp"
#include "test_support.hpp"

using namespace platoon;
using platoon::test::throws_code;

namespace {

CMat random_cmat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat A(r, c);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = cd(n(rng), n(rng));
  return A;
}

}  // namespace

TEST_CASE("soft threshold shrinks magnitudes") {
  CVec x(3);
  x << cd(3.0, 4.0), cd(0.1, 0.0), cd(-2.0, 0.0);
  const CVec s = soft_threshold(x, 1.0);
  CHECK(std::abs(s(0) - cd(2.4, 3.2)) < 1e-12);
  CHECK(s(1) == cd(0.0, 0.0));
  CHECK(std::abs(s(2) - cd(-1.0, 0.0)) < 1e-12);
}

TEST_CASE("LASSO examples") {
  std::mt19937_64 rng(3);
  const CMat A = random_cmat(10, 6, rng);
  CHECK(lasso_solve(CVec::Zero(10), A, 0.1, 100).x.cwiseAbs().maxCoeff() == 0.0);

  const CVec y = random_cmat(10, 1, rng).col(0);
  const double lmax = (A.adjoint() * y).cwiseAbs().maxCoeff();
  CHECK(lasso_solve(y, A, 1.01 * lmax, 1000).x.cwiseAbs().maxCoeff() == 0.0);

  const CMat Q = random_cmat(10, 4, rng).householderQr().householderQ() * CMat::Identity(10, 4);
  const LassoResult orth = lasso_solve(y, Q, 0.3, 1000, 1e-12);
  CHECK((orth.x - soft_threshold(Q.adjoint() * y, 0.3)).cwiseAbs().maxCoeff() < 1e-9);

  const LassoResult traced = lasso_solve(y, A, 0.2 * lmax, 500, 1e-12, true);
  REQUIRE(traced.objective.size() >= 2);
  for (std::size_t i = 1; i < traced.objective.size(); ++i) {
    CHECK(traced.objective[i] <= traced.objective[i - 1] + 1e-12);
  }
  CHECK(traced.objective.back() == doctest::Approx(lasso_objective(y, A, traced.x, 0.2 * lmax)));
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::Dilus, Method::NoOffgrid, Method::NaiveVbi, Method::Lasso, Method::Map, Method::BsOnly}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK(method_name(Method::NoOffgrid) == "no_offgrid");
  CHECK(throws_code([] { method_from_name("kalman"); }, ErrorCode::InvalidArgument));
}

TEST_CASE("grid search refuses oversized joint spaces") {
  ScenarioConfig cfg = preset_config("desk");
  const Scene s = simulate_scene(cfg, 1);
  cfg.algo.map_state_cap = 399.0;
  CHECK(throws_code([&] { MapFilter f(cfg, s.grid, s.dep, s.pilots, s.ris, s.H_rb); }, ErrorCode::SearchSpace));
  cfg.algo.map_state_cap = 400.0;
  MapFilter ok(cfg, s.grid, s.dep, s.pilots, s.ris, s.H_rb);
  CHECK(ok.states() == 400);
}

TEST_CASE("grid search with a single cell is certain") {
  ScenarioConfig cfg = preset_config("desk");
  const Scene s = simulate_scene(cfg, 1);
  ScenarioConfig one = cfg;
  one.U = 1;
  one.M = 1;
  const GridSpec g = make_scenario_grid(one);
  const CMat pilots = s.pilots.topRows(1);
  MapFilter f(one, g, s.dep, pilots, s.ris, s.H_rb);
  std::mt19937_64 rng(2);
  const RVec p = f.step(random_cmat(static_cast<Eigen::Index>(cfg.K * cfg.G), 1, rng).col(0));
  REQUIRE(p.size() == 1);
  CHECK(p(0) == doctest::Approx(1.0));
}

TEST_CASE("grid search likelihood matches the dense Gaussian evaluation") {
  ScenarioConfig cfg = preset_config("desk");
  const Scene s = simulate_scene(cfg, 5);
  ScenarioConfig small = cfg;
  small.U = 4;
  const GridSpec g = make_scenario_grid(small);
  MapFilter f(small, g, s.dep, s.pilots, s.ris, s.H_rb);
  REQUIRE(f.states() == 16);

  const SensingBuilder b(g, s.dep, s.pilots, s.ris, s.H_rb);
  const SensingMatrices sm = b.build(OffsetEstimate::zeros(small.M, g));
  const RVec rate = nlos_activity_rate(small, true);
  const auto nr = static_cast<Eigen::Index>(sm.layout.nlos_ris_block());
  RVec nlos_var(rate.size());
  nlos_var.head(nr) = rate.head(nr) * nlos_variance_ris(small, g, s.dep);
  nlos_var.tail(rate.size() - nr) = rate.tail(rate.size() - nr) * nlos_variance_bs(small, g, s.dep);
  const double lambda = carrier_wavelength(small);

  std::mt19937_64 rng(8);
  const CVec y = s.y[0];
  const double sy = y.norm() / std::sqrt(static_cast<double>(y.size()));
  const RVec ll = f.log_likelihood(y);
  const RVec post = f.step(y);
  const RVec prior = f.spatial_prior();
  RVec expect_post(16);
  for (std::size_t st = 0; st < 16; ++st) {
    const std::vector<std::size_t> q = f.decode(st);
    CHECK(q[0] + 4 * q[1] == st);
    CMat C = sm.Xi * nlos_var.cast<cd>().asDiagonal() * sm.Xi.adjoint();
    C.diagonal().array() += small.noise_power_w();
    for (std::size_t m = 0; m < small.M; ++m) {
      const Position3 p = g.grid_points[q[m]];
      const double vr = std::norm(los_gain(small.ris_gain0(), (p - s.dep.ris_position).norm(), small.zeta_ris, lambda));
      const double vb = std::norm(los_gain(small.bs_gain0(), (p - s.dep.bs_position).norm(), small.zeta_bs, lambda));
      const CVec fr = sm.F.col(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Ris, m, q[m])));
      const CVec fb = sm.F.col(static_cast<Eigen::Index>(sm.layout.los_col(Branch::Bs, m, q[m])));
      C += vr * fr * fr.adjoint() + vb * fb * fb.adjoint();
    }
    C /= sy * sy;
    const Eigen::LLT<CMat> llt(C);
    const CVec yn = y / sy;
    const double log_det = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
    const double dense = -log_det - yn.dot(llt.solve(yn)).real();
    CHECK(ll(static_cast<Eigen::Index>(st)) == doctest::Approx(dense).epsilon(1e-9));
    const double pr = prior(static_cast<Eigen::Index>(st));
    expect_post(static_cast<Eigen::Index>(st)) = pr > 0.0 ? dense + std::log(pr) : -1e300;
  }
  expect_post = (expect_post.array() - expect_post.maxCoeff()).exp().matrix();
  expect_post /= expect_post.sum();
  CHECK((post - expect_post).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("baselines locate noiseless on-grid VUEs") {
  const ScenarioConfig cfg = test::small_los_config(2, 2);
  const Scene s = test::on_grid_scene(cfg, {6, 10}, 4);
  for (Method m : {Method::Map, Method::Lasso, Method::NoOffgrid, Method::Dilus}) {
    const BaselineResult r = run_method(m, s);
    REQUIRE(r.slots.size() == 2);
    CHECK(r.method == m);
    for (const SlotEstimate& e : r.slots) {
      CHECK(e.q_hat == std::vector<std::size_t>{6, 10});
      CHECK(e.rmse < 1e-6);
    }
  }
}

TEST_CASE("the BS-only method needs a scene without the surface") {
  ScenarioConfig cfg = test::small_los_config(1, 2);
  const Scene with = simulate_scene(cfg, 2);
  CHECK(throws_code([&] { run_method(Method::BsOnly, with); }, ErrorCode::InvalidArgument));
  cfg.use_ris = false;
  const Scene without = simulate_scene(cfg, 2);
  const BaselineResult r = run_method(Method::BsOnly, without);
  CHECK(r.method == Method::BsOnly);
  CHECK(r.slots.size() == 2);
}
