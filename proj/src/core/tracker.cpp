#include "platoon/core/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "platoon/core/error.hpp"

namespace platoon {

namespace {

double mean_column_norm(const CMat& A, Eigen::Index first, Eigen::Index count) {
  if (count == 0) return 1.0;
  double s = 0.0;
  for (Eigen::Index j = first; j < first + count; ++j) s += A.col(j).norm();
  const double v = s / static_cast<double>(count);
  return v > 0.0 ? v : 1.0;
}

std::vector<std::size_t> top_indices(const RVec& score, std::size_t count) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(score.size()));
  std::iota(idx.begin(), idx.end(), 0);
  count = std::min(count, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = score(static_cast<Eigen::Index>(a));
                      const double sb = score(static_cast<Eigen::Index>(b));
                      return sa != sb ? sa > sb : a < b;
                    });
  idx.resize(count);
  return idx;
}

}  // namespace

BlockScales dictionary_scales(const SensingBuilder& builder) {
  const SensingLayout& L = builder.layout();
  const SensingMatrices s = builder.build(OffsetEstimate::zeros(L.M, builder.grid()));
  const auto lb = static_cast<Eigen::Index>(L.los_block());
  const auto nr = static_cast<Eigen::Index>(L.nlos_ris_block());
  const auto nb = static_cast<Eigen::Index>(L.nlos_bs_block());
  BlockScales sc;
  if (L.has_ris) {
    sc.los_ris = mean_column_norm(s.F, 0, lb);
    sc.los_bs = mean_column_norm(s.F, lb, lb);
    sc.nlos_ris = mean_column_norm(s.Xi, 0, nr);
  } else {
    sc.los_bs = mean_column_norm(s.F, 0, lb);
  }
  sc.nlos_bs = mean_column_norm(s.Xi, nr, nb);
  return sc;
}

LinearModel normalized_model(const SensingBuilder& builder, const BlockScales& scales,
                             const CVec& y, const OffsetEstimate& offsets) {
  const SensingLayout& L = builder.layout();
  if (y.size() != static_cast<Eigen::Index>(builder.rows())) {
    fail(ErrorCode::InvalidDimension, "observation length must be K*G");
  }
  const SensingMatrices s = builder.build(offsets);
  const auto lb = static_cast<Eigen::Index>(L.los_block());
  const auto nr = static_cast<Eigen::Index>(L.nlos_ris_block());
  const auto nb = static_cast<Eigen::Index>(L.nlos_bs_block());
  LinearModel m;
  m.M = L.M;
  m.U = L.U;
  const double norm = y.norm();
  double sy = norm > 0.0 ? norm / std::sqrt(static_cast<double>(y.size())) : 1.0;
  m.y = y / sy;
  if (L.has_ris) {
    m.F_R = s.F.leftCols(lb) / scales.los_ris;
    m.F_B = s.F.rightCols(lb) / scales.los_bs;
  } else {
    m.F_R.resize(y.size(), 0);
    m.F_B = s.F / scales.los_bs;
  }
  m.Xi.resize(y.size(), nr + nb);
  if (nr > 0) m.Xi.leftCols(nr) = s.Xi.leftCols(nr) / scales.nlos_ris;
  m.Xi.rightCols(nb) = s.Xi.rightCols(nb) / scales.nlos_bs;
  m.prepare();
  return m;
}

double get_coord(const OffsetEstimate& o, const OffsetCoord& c) {
  const auto m = static_cast<Eigen::Index>(c.m);
  const auto i = static_cast<Eigen::Index>(c.index);
  switch (c.kind) {
    case CoordKind::Road: return o.delta_r(m, i);
    case CoordKind::Omega: return o.delta_omega(m, i);
    case CoordKind::Phi: return o.delta_phi(m, i);
    case CoordKind::Theta: return o.delta_theta(m, i);
  }
  return 0.0;
}

void set_coord(OffsetEstimate& o, const OffsetCoord& c, double value) {
  const auto m = static_cast<Eigen::Index>(c.m);
  const auto i = static_cast<Eigen::Index>(c.index);
  switch (c.kind) {
    case CoordKind::Road: o.delta_r(m, i) = value; break;
    case CoordKind::Omega: o.delta_omega(m, i) = value; break;
    case CoordKind::Phi: o.delta_phi(m, i) = value; break;
    case CoordKind::Theta: o.delta_theta(m, i) = value; break;
  }
}

std::vector<OffsetCoord> select_coordinates(const PosteriorSet& post, const SensingLayout& layout,
                                            const GridSpec& grid, std::size_t top_p,
                                            std::size_t nlos_top) {
  std::vector<OffsetCoord> out;
  const double road_bound = grid.delta_L / 2.0;
  for (std::size_t m = 0; m < layout.M; ++m) {
    const RVec row = post.q.row(static_cast<Eigen::Index>(m)).transpose();
    for (std::size_t u : top_indices(row, top_p)) {
      out.push_back({CoordKind::Road, m, u, road_bound});
    }
  }
  if (post.c.size() == 0) return out;
  const RVec energy = post.v.second_moment();
  auto pick = [&](std::size_t m, std::size_t first, std::size_t count,
                  const std::function<void(std::size_t)>& emit) {
    RVec score = RVec::Constant(static_cast<Eigen::Index>(count), -1.0);
    for (std::size_t j = 0; j < count; ++j) {
      const auto col = static_cast<Eigen::Index>(first + m * count + j);
      if (post.c(col) >= 0.5) score(static_cast<Eigen::Index>(j)) = energy(col);
    }
    for (std::size_t j : top_indices(score, nlos_top)) {
      if (score(static_cast<Eigen::Index>(j)) >= 0.0) emit(j);
    }
  };
  for (std::size_t m = 0; m < layout.M; ++m) {
    if (layout.has_ris) {
      pick(m, 0, layout.ris_grid, [&](std::size_t n) {
        out.push_back({CoordKind::Phi, m, n, grid.ris_phi_halfwidth[grid.ris_phi_index(n)]});
        out.push_back({CoordKind::Theta, m, n, grid.ris_theta_halfwidth[grid.ris_theta_index(n)]});
      });
    }
    pick(m, layout.nlos_ris_block(), layout.bs_grid, [&](std::size_t k) {
      out.push_back({CoordKind::Omega, m, k, grid.bs_aoa_halfwidth[k]});
    });
  }
  return out;
}

Surrogate::Surrogate(const SensingBuilder& builder, const BlockScales& scales,
                     const LinearModel& model, const PosteriorSet& post,
                     const OffsetEstimate& base)
    : builder_(builder), scales_(scales), model_(model), base_(base) {
  const auto n = model.A.cols();
  variance_.resize(n);
  const auto nr = model.F_R.cols();
  const auto nb = model.F_B.cols();
  if (nr > 0) variance_.head(nr) = post.rho_R.mean().cwiseInverse();
  variance_.segment(nr, nb) = post.rho_B.mean().cwiseInverse();
  variance_.tail(model.Xi.cols()) = post.gamma.mean().cwiseInverse();
  const double kappa = post.kappa.mean()(0);
  const auto kg = model.y.size();
  CMat C = model.A * variance_.cast<cd>().asDiagonal() * model.A.adjoint();
  C.diagonal().array() += 1.0 / kappa;
  const Eigen::LLT<CMat> llt(C);
  if (llt.info() != Eigen::Success) fail(ErrorCode::Conditioning, "marginal covariance is not positive definite");
  cinv_ = llt.solve(CMat::Identity(kg, kg));
  weighted_y_ = cinv_ * model.y;
  log_det_ = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  quad_ = model.y.dot(weighted_y_).real();
  base_value_ = -log_det_ - quad_;
}

Eigen::Index Surrogate::global_index(const ColumnRef& ref) const {
  switch (ref.block) {
    case 0: return ref.col;
    case 1: return model_.F_R.cols() + ref.col;
    default: return model_.F_R.cols() + model_.F_B.cols() + ref.col;
  }
}

std::vector<Surrogate::ColumnRef> Surrogate::affected(const OffsetCoord& c) const {
  const SensingLayout& L = builder_.layout();
  switch (c.kind) {
    case CoordKind::Road: {
      const auto col = static_cast<Eigen::Index>(c.m * L.U + c.index);
      if (L.has_ris) return {{0, col}, {1, col}};
      return {{1, col}};
    }
    case CoordKind::Omega:
      return {{2, static_cast<Eigen::Index>(L.nlos_bs_col(c.m, c.index))}};
    case CoordKind::Phi:
    case CoordKind::Theta:
      return {{2, static_cast<Eigen::Index>(L.nlos_ris_col(c.m, c.index))}};
  }
  return {};
}

CVec Surrogate::column(const ColumnRef& ref, const OffsetEstimate& o) const {
  const SensingLayout& L = builder_.layout();
  const auto col = static_cast<std::size_t>(ref.col);
  if (ref.block < 2) {
    const std::size_t m = col / L.U, u = col % L.U;
    const double dr = o.delta_r(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(u));
    if (ref.block == 0) return builder_.los_column(Branch::Ris, m, u, dr) / scales_.los_ris;
    return builder_.los_column(Branch::Bs, m, u, dr) / scales_.los_bs;
  }
  if (col < L.nlos_ris_block()) {
    const std::size_t m = col / L.ris_grid, n = col % L.ris_grid;
    const auto mi = static_cast<Eigen::Index>(m);
    const auto ni = static_cast<Eigen::Index>(n);
    return builder_.nlos_ris_column(m, n, o.delta_phi(mi, ni), o.delta_theta(mi, ni)) /
           scales_.nlos_ris;
  }
  const std::size_t c2 = col - L.nlos_ris_block();
  const std::size_t m = c2 / L.bs_grid, k = c2 % L.bs_grid;
  return builder_.nlos_bs_column(
             m, k, o.delta_omega(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k))) /
         scales_.nlos_bs;
}

double Surrogate::value_at(const std::vector<OffsetCoord>& coords, const RVec& x) const {
  if (x.size() != static_cast<Eigen::Index>(coords.size())) {
    fail(ErrorCode::InvalidDimension, "coordinate vector size mismatch");
  }
  OffsetEstimate o = base_;
  std::vector<ColumnRef> refs;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double v = x(static_cast<Eigen::Index>(i));
    if (std::abs(v) > coords[i].bound * (1.0 + 1e-12)) {
      fail(ErrorCode::InvalidOffset, "offset outside its admissible range");
    }
    if (v == get_coord(base_, coords[i])) continue;
    set_coord(o, coords[i], v);
    for (const ColumnRef& r : affected(coords[i])) {
      const bool seen = std::any_of(refs.begin(), refs.end(), [&](const ColumnRef& q) {
        return q.block == r.block && q.col == r.col;
      });
      if (!seen) refs.push_back(r);
    }
  }
  if (refs.empty()) return base_value_;
  const auto kg = model_.y.size();
  const auto k = static_cast<Eigen::Index>(2 * refs.size());
  CMat V(kg, k);
  RVec w(k);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const Eigen::Index g = global_index(refs[i]);
    const auto j = static_cast<Eigen::Index>(2 * i);
    V.col(j) = column(refs[i], o);
    V.col(j + 1) = model_.A.col(g);
    w(j) = variance_(g);
    w(j + 1) = -variance_(g);
  }
  const CMat CV = cinv_ * V;
  CMat K = w.cast<cd>().asDiagonal() * (V.adjoint() * CV);
  K.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<CMat> lu(K);
  const double log_det = log_det_ + lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
  const CVec b = V.adjoint() * weighted_y_;
  const CVec wb = w.cast<cd>().asDiagonal() * b;
  const double quad = quad_ - b.dot(lu.solve(wb)).real();
  const double value = -log_det - quad;
  if (!std::isfinite(value)) fail(ErrorCode::Numerical, "surrogate is not finite");
  return value;
}

RVec Surrogate::gradient(const std::vector<OffsetCoord>& coords, const RVec& x) const {
  RVec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double b = coords[static_cast<std::size_t>(i)].bound;
    const double h = 1e-5 * b;
    RVec xp = x, xm = x;
    double denom = 2.0 * h;
    if (x(i) + h > b) {
      denom = h;
    } else {
      xp(i) += h;
    }
    if (x(i) - h < -b) {
      denom = h;
    } else {
      xm(i) -= h;
    }
    g(i) = (value_at(coords, xp) - value_at(coords, xm)) / denom;
  }
  return g;
}

ArmijoResult armijo_ascent(const std::function<double(const RVec&)>& f,
                           const std::function<RVec(const RVec&)>& grad, const RVec& x0,
                           const RVec& bound, const ArmijoParams& params) {
  ArmijoResult res;
  res.x = x0;
  res.f_start = res.f_end = f(x0);
  if (x0.size() == 0) return res;
  if (bound.size() != x0.size() || (bound.array() <= 0.0).any()) {
    fail(ErrorCode::InvalidArgument, "bounds must be positive and match the coordinates");
  }
  const RVec gs = grad(x0).cwiseProduct(bound);
  if (!gs.allFinite()) fail(ErrorCode::Numerical, "surrogate gradient is not finite");
  if (gs.norm() <= 1e-12 * std::max(1.0, std::abs(res.f_start))) return res;
  const RVec d = gs / gs.lpNorm<Eigen::Infinity>();
  const RVec xs0 = x0.cwiseQuotient(bound);
  double t = params.initial_step;
  for (std::size_t b = 0; b <= params.max_backtracks; ++b, t *= params.contraction) {
    const RVec xs = (xs0 + t * d).cwiseMax(-1.0).cwiseMin(1.0);
    const RVec x = xs.cwiseProduct(bound);
    const double f1 = f(x);
    res.backtracks = b;
    if (std::isfinite(f1) && f1 >= res.f_start + params.sufficient_increase * gs.dot(xs - xs0)) {
      if (f1 > res.f_start) {
        res.x = x;
        res.f_end = f1;
        res.moved = true;
      }
      return res;
    }
  }
  return res;
}

MStepResult m_step(const std::function<double(const RVec&)>& f,
                   const std::function<RVec(const RVec&)>& grad, const RVec& x0,
                   const RVec& bound, const ArmijoParams& params, std::size_t max_steps) {
  MStepResult res;
  res.x = x0;
  res.trace.push_back(f(x0));
  for (std::size_t s = 0; s < max_steps; ++s) {
    const ArmijoResult ar = armijo_ascent(f, grad, res.x, bound, params);
    if (!ar.moved) break;
    res.x = ar.x;
    res.trace.push_back(ar.f_end);
    res.steps = s + 1;
  }
  return res;
}

double position_rmse(const std::vector<Position3>& est, const std::vector<Position3>& truth) {
  if (est.size() != truth.size() || est.empty()) {
    fail(ErrorCode::ShapeMismatch, "position lists must be non-empty and of equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) s += (est[i] - truth[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(est.size()));
}

CategoricalQ energy_location_posterior(const PosteriorSet& post, std::size_t M, std::size_t U) {
  const auto Mi = static_cast<Eigen::Index>(M);
  const auto Ui = static_cast<Eigen::Index>(U);
  CategoricalQ q(Mi, Ui);
  for (Eigen::Index m = 0; m < Mi; ++m) {
    RVec e = post.z_B.mean.segment(m * Ui, Ui).cwiseAbs2();
    if (post.z_R.size() > 0) e += post.z_R.mean.segment(m * Ui, Ui).cwiseAbs2();
    const double s = e.sum();
    if (s > 0.0 && std::isfinite(s)) {
      q.row(m) = (e / s).transpose();
    } else {
      q.row(m).setConstant(1.0 / static_cast<double>(U));
    }
  }
  return q;
}

Tracker::Tracker(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep,
                 const CMat& pilots, const RisProfile& ris, const CMat& H_rb, TrackerOptions opt)
    : cfg_(cfg), grid_(grid), opt_(opt), builder_(grid, dep, pilots, ris, H_rb) {
  scales_ = dictionary_scales(builder_);
  spatial_ = spatial_kernel(cfg.platoon, cfg.U);
  temporal_ = temporal_kernel(cfg);
  activity_ = nlos_activity_rate(cfg, dep.use_ris);
}

void Tracker::reset() {
  prev_q_.reset();
  prev_c_.reset();
}

std::vector<Position3> Tracker::estimate_positions(const CategoricalQ& q, const OffsetEstimate& o,
                                                   std::vector<std::size_t>& q_hat,
                                                   std::vector<double>& offsets) const {
  std::vector<Position3> pos;
  q_hat.clear();
  offsets.clear();
  for (Eigen::Index m = 0; m < q.rows(); ++m) {
    Eigen::Index u = 0;
    q.row(m).maxCoeff(&u);
    const double dr = o.delta_r(m, u);
    q_hat.push_back(static_cast<std::size_t>(u));
    offsets.push_back(dr);
    pos.push_back(grid_.point(static_cast<std::size_t>(u), dr));
  }
  return pos;
}

SlotResult Tracker::step(const CVec& y, const std::vector<Position3>* truth) {
  const bool use_history = opt_.temporal && opt_.structured;
  const SlotPriors pri =
      use_history
          ? cross_slot_priors(prev_q_, prev_c_, temporal_, activity_, cfg_.nlos.corr, cfg_.M)
          : cross_slot_priors(std::nullopt, std::nullopt, temporal_, activity_, cfg_.nlos.corr,
                              cfg_.M);
  VbiOptions vopt;
  vopt.structured = opt_.structured;
  vopt.cross_term = cfg_.algo.cross_term;
  vopt.tol = cfg_.algo.vbi_tol;
  vopt.max_sweeps = cfg_.algo.vbi_max_sweeps;

  SlotResult res;
  res.offsets = OffsetEstimate::zeros(cfg_.M, grid_);
  LinearModel model = normalized_model(builder_, scales_, y, res.offsets);
  std::optional<PosteriorSet> warm;
  EStepResult es;
  for (std::size_t r = 1; r <= cfg_.algo.r_max; ++r) {
    es = e_step(model, pri.q, pri.c, spatial_, cfg_.hyper, vopt, warm);
    if (!opt_.structured) es.post.q = energy_location_posterior(es.post, cfg_.M, cfg_.U);
    res.vbi_sweeps += es.sweeps;
    bool converged = false;
    if (warm) {
      const PosteriorSet& w = *warm;
      const double dz = std::max(relative_change(es.post.z_R.mean, w.z_R.mean),
                                 relative_change(es.post.z_B.mean, w.z_B.mean));
      const double dsz = std::max(relative_change(es.post.z_R.cov, w.z_R.cov),
                                  relative_change(es.post.z_B.cov, w.z_B.cov));
      converged = dz < cfg_.algo.eps_mu_z && relative_change(es.post.v.mean, w.v.mean) < cfg_.algo.eps_mu_v &&
                  dsz < cfg_.algo.eps_sigma_z &&
                  relative_change(es.post.v.cov, w.v.cov) < cfg_.algo.eps_sigma_v;
    }
    warm = es.post;
    res.iterations = r;
    if (!converged && opt_.offgrid) {
      for (std::size_t s = 0; s < cfg_.algo.ascent_steps; ++s) {
        const std::vector<OffsetCoord> coords =
            select_coordinates(es.post, builder_.layout(), grid_, cfg_.algo.top_p, cfg_.algo.nlos_top);
        if (coords.empty()) break;
        const Surrogate sur(builder_, scales_, model, es.post, res.offsets);
        RVec x0(static_cast<Eigen::Index>(coords.size()));
        RVec bound(x0.size());
        for (std::size_t i = 0; i < coords.size(); ++i) {
          x0(static_cast<Eigen::Index>(i)) = get_coord(res.offsets, coords[i]);
          bound(static_cast<Eigen::Index>(i)) = coords[i].bound;
        }
        const ArmijoResult ar = armijo_ascent(
            [&](const RVec& x) { return sur.value_at(coords, x); },
            [&](const RVec& x) { return sur.gradient(coords, x); }, x0, bound, cfg_.algo.armijo);
        res.surrogate_trace.push_back(ar.f_end);
        res.surrogate_gain.push_back(ar.f_end - ar.f_start);
        if (!ar.moved) break;
        for (std::size_t i = 0; i < coords.size(); ++i) {
          set_coord(res.offsets, coords[i], ar.x(static_cast<Eigen::Index>(i)));
        }
        model = normalized_model(builder_, scales_, y, res.offsets);
      }
    }
    if (truth) {
      std::vector<std::size_t> qh;
      std::vector<double> dr;
      res.rmse_trace.push_back(position_rmse(estimate_positions(es.post.q, res.offsets, qh, dr), *truth));
    }
    if (converged) {
      res.converged = true;
      break;
    }
  }
  res.psi_q = es.post.q;
  res.psi_c = es.post.c;
  res.position = estimate_positions(res.psi_q, res.offsets, res.q_hat, res.road_offset);
  if (truth) res.rmse = position_rmse(res.position, *truth);
  if (use_history) {
    prev_q_ = res.psi_q;
    prev_c_ = res.psi_c;
  }
  return res;
}

std::vector<SlotResult> track_scene(const Scene& scene, TrackerOptions opt) {
  Tracker tracker(scene.cfg, scene.grid, scene.dep, scene.pilots, scene.ris, scene.H_rb, opt);
  std::vector<SlotResult> out;
  out.reserve(scene.y.size());
  for (std::size_t t = 0; t < scene.y.size(); ++t) {
    out.push_back(tracker.step(scene.y[t], &scene.traj.position[t]));
  }
  return out;
}

}  // namespace platoon
