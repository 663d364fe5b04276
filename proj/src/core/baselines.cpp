#include "platoon/core/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "platoon/core/error.hpp"
#include "platoon/core/priors.hpp"
#include "platoon/core/sensing.hpp"

namespace platoon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

RVec normalize_log(const RVec& logw) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) fail(ErrorCode::DegeneratePosterior, "every joint state has zero mass");
  RVec w = (logw.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
  return w / w.sum();
}

BaselineResult from_tracker(Method m, const std::vector<SlotResult>& slots) {
  BaselineResult r;
  r.method = m;
  for (const SlotResult& s : slots) {
    SlotEstimate e;
    e.position = s.position;
    e.q_hat = s.q_hat;
    e.iterations = s.iterations;
    e.converged = s.converged;
    e.rmse = s.rmse;
    e.rmse_trace = s.rmse_trace;
    r.slots.push_back(std::move(e));
  }
  return r;
}

// Normalized dictionary at zero offsets and the observation scale of y.
struct ScaledDictionary {
  CMat F;   // [RIS LoS | BS LoS]
  CMat Xi;  // [RIS NLoS | BS NLoS]
};

ScaledDictionary scaled_dictionary(const SensingBuilder& builder, const BlockScales& scales) {
  const SensingLayout& L = builder.layout();
  const SensingMatrices s = builder.build(OffsetEstimate::zeros(L.M, builder.grid()));
  const auto lb = static_cast<Eigen::Index>(L.los_block());
  const auto nr = static_cast<Eigen::Index>(L.nlos_ris_block());
  const auto nb = static_cast<Eigen::Index>(L.nlos_bs_block());
  ScaledDictionary d;
  d.F = s.F;
  d.Xi = s.Xi;
  if (L.has_ris) {
    d.F.leftCols(lb) /= scales.los_ris;
    d.F.rightCols(lb) /= scales.los_bs;
    d.Xi.leftCols(nr) /= scales.nlos_ris;
  } else {
    d.F /= scales.los_bs;
  }
  d.Xi.rightCols(nb) /= scales.nlos_bs;
  return d;
}

double observation_scale(const CVec& y) {
  const double n = y.norm();
  return n > 0.0 ? n / std::sqrt(static_cast<double>(y.size())) : 1.0;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Dilus: return "dilus";
    case Method::NoOffgrid: return "no_offgrid";
    case Method::NaiveVbi: return "naive_vbi";
    case Method::Lasso: return "lasso";
    case Method::Map: return "map";
    case Method::BsOnly: return "bs_only";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  for (Method m : {Method::Dilus, Method::NoOffgrid, Method::NaiveVbi, Method::Lasso, Method::Map,
                   Method::BsOnly}) {
    if (method_name(m) == name) return m;
  }
  fail(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
}

CVec soft_threshold(const CVec& x, double lambda) {
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x(i));
    out(i) = a > lambda ? x(i) * (1.0 - lambda / a) : cd(0.0, 0.0);
  }
  return out;
}

double lasso_objective(const CVec& y, const CMat& A, const CVec& x, double lambda) {
  return 0.5 * (y - A * x).squaredNorm() + lambda * x.cwiseAbs().sum();
}

LassoResult lasso_solve(const CVec& y, const CMat& A, double lambda, std::size_t max_iters,
                        double tol, bool record_objective) {
  if (lambda < 0.0) fail(ErrorCode::InvalidArgument, "lambda must be nonnegative");
  if (A.rows() != y.size()) fail(ErrorCode::InvalidDimension, "dictionary rows must match y");
  LassoResult res;
  res.x = CVec::Zero(A.cols());
  if (A.cols() == 0) return res;
  const CMat gram = A.adjoint() * A;
  const CVec rhs = A.adjoint() * y;
  const Eigen::SelfAdjointEigenSolver<CMat> eig(gram, Eigen::EigenvaluesOnly);
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmax > 0.0)) return res;
  const double step = 1.0 / lmax;
  if (record_objective) res.objective.push_back(lasso_objective(y, A, res.x, lambda));
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const CVec next = soft_threshold(res.x - step * (gram * res.x - rhs), lambda * step);
    const double dn = (next - res.x).norm();
    const double nn = next.norm();
    res.x = next;
    res.iterations = it;
    if (record_objective) res.objective.push_back(lasso_objective(y, A, res.x, lambda));
    if (dn <= tol * nn || nn == 0.0) break;
  }
  return res;
}

MapFilter::MapFilter(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep,
                     const CMat& pilots, const RisProfile& ris, const CMat& H_rb)
    : cfg_(cfg), grid_(grid), builder_(grid, dep, pilots, ris, H_rb) {
  const double states = std::pow(static_cast<double>(cfg.U), static_cast<double>(cfg.M));
  if (states > cfg.algo.map_state_cap) {
    fail(ErrorCode::SearchSpace, "joint search space of " + std::to_string(states) +
                                     " states exceeds the configured cap");
  }
  states_ = static_cast<std::size_t>(states);
  scales_ = dictionary_scales(builder_);
  spatial_ = spatial_kernel(cfg.platoon, cfg.U);
  temporal_ = temporal_kernel(cfg);
  log_spatial_ = RVec::Constant(static_cast<Eigen::Index>(states_), 0.0);
  for (std::size_t s = 0; s < states_; ++s) {
    const std::vector<std::size_t> q = decode(s);
    double lp = -std::log(static_cast<double>(cfg.U));
    for (std::size_t m = 0; m + 1 < q.size(); ++m) {
      const double p = spatial_(static_cast<Eigen::Index>(q[m]), static_cast<Eigen::Index>(q[m + 1]));
      lp += p > 0.0 ? std::log(p) : kNegInf;
    }
    log_spatial_(static_cast<Eigen::Index>(s)) = lp;
  }
  const ScaledDictionary d = scaled_dictionary(builder_, scales_);
  nlos_dictionary_ = d.Xi;

  const SensingLayout& L = builder_.layout();
  const double lambda = carrier_wavelength(cfg);
  const std::size_t sub = cfg.algo.map_subcells;
  std::vector<Branch> branches;
  if (L.has_ris) branches.push_back(Branch::Ris);
  branches.push_back(Branch::Bs);
  const auto cols = static_cast<Eigen::Index>(branches.size() * L.M * L.U * sub);
  dictionary_.resize(static_cast<Eigen::Index>(builder_.rows()), cols);
  los_variance_.resize(cols);
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const bool ris_branch = branches[bi] == Branch::Ris;
    const double scale = ris_branch ? scales_.los_ris : scales_.los_bs;
    const double g0 = ris_branch ? cfg.ris_gain0() : cfg.bs_gain0();
    const double zeta = ris_branch ? cfg.zeta_ris : cfg.zeta_bs;
    const Position3& anchor = ris_branch ? dep.ris_position : dep.bs_position;
    for (std::size_t m = 0; m < L.M; ++m) {
      for (std::size_t u = 0; u < L.U; ++u) {
        for (std::size_t j = 0; j < sub; ++j) {
          const double dr = grid.delta_L * ((static_cast<double>(j) + 0.5) / static_cast<double>(sub) - 0.5);
          const auto c = static_cast<Eigen::Index>(sub_column(bi, m, u, j));
          dictionary_.col(c) = builder_.los_column(branches[bi], m, u, dr) / scale;
          const double dist = (grid.point(u, dr) - anchor).norm();
          los_variance_(c) = std::norm(los_gain(g0, dist, zeta, lambda)) * scale * scale;
        }
      }
    }
  }
  const RVec rate = nlos_activity_rate(cfg, L.has_ris);
  nlos_variance_ = RVec(rate.size());
  const auto nr = static_cast<Eigen::Index>(L.nlos_ris_block());
  if (nr > 0) {
    nlos_variance_.head(nr) =
        rate.head(nr) * nlos_variance_ris(cfg, grid, dep) * scales_.nlos_ris * scales_.nlos_ris;
  }
  const auto nb = static_cast<Eigen::Index>(L.nlos_bs_block());
  nlos_variance_.tail(nb) =
      rate.tail(nb) * nlos_variance_bs(cfg, grid, dep) * scales_.nlos_bs * scales_.nlos_bs;
}

std::size_t MapFilter::sub_column(std::size_t branch, std::size_t m, std::size_t u,
                                  std::size_t j) const {
  return ((branch * cfg_.M + m) * cfg_.U + u) * cfg_.algo.map_subcells + j;
}

std::vector<std::size_t> MapFilter::decode(std::size_t s) const {
  std::vector<std::size_t> q(cfg_.M);
  for (std::size_t m = 0; m < cfg_.M; ++m) {
    q[m] = s % cfg_.U;
    s /= cfg_.U;
  }
  return q;
}

RVec MapFilter::spatial_prior() const { return normalize_log(log_spatial_); }

RVec MapFilter::log_likelihood(const CVec& y) const {
  if (y.size() != static_cast<Eigen::Index>(builder_.rows())) {
    fail(ErrorCode::InvalidDimension, "observation length must equal K*G");
  }
  const SensingLayout& L = builder_.layout();
  const double sy = observation_scale(y);
  const double inv2 = 1.0 / (sy * sy);
  const CVec yn = y / sy;

  CMat C = nlos_dictionary_ * (nlos_variance_ * inv2).cast<cd>().asDiagonal() *
           nlos_dictionary_.adjoint();
  C.diagonal().array() += cfg_.noise_power_w() * inv2;
  const Eigen::LLT<CMat> llt(C);
  if (llt.info() != Eigen::Success) fail(ErrorCode::Conditioning, "NLoS covariance is not positive definite");
  const double log_det0 = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  const CVec cy = llt.solve(yn);
  const double quad0 = yn.dot(cy).real();
  const CMat P = llt.solve(dictionary_);
  const CMat G = dictionary_.adjoint() * P;
  const CVec w = dictionary_.adjoint() * cy;
  const RVec sd = (los_variance_ * inv2).cwiseSqrt();

  const std::size_t n_branch = L.has_ris ? 2 : 1;
  const std::size_t sub = cfg_.algo.map_subcells;
  std::size_t sub_states = 1;
  for (std::size_t m = 0; m < cfg_.M; ++m) sub_states *= sub;
  const double log_sub = std::log(static_cast<double>(sub_states));
  const auto k = static_cast<Eigen::Index>(n_branch * cfg_.M);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(k));
  RVec ll(static_cast<Eigen::Index>(states_));
  RVec terms(static_cast<Eigen::Index>(sub_states));
  CMat Ks(k, k);
  CVec b(k);
  for (std::size_t s = 0; s < states_; ++s) {
    const std::vector<std::size_t> q = decode(s);
    for (std::size_t r = 0; r < sub_states; ++r) {
      std::size_t c = 0;
      std::size_t rest = r;
      for (std::size_t m = 0; m < cfg_.M; ++m) {
        const std::size_t j = rest % sub;
        rest /= sub;
        for (std::size_t bi = 0; bi < n_branch; ++bi) {
          cols[c++] = static_cast<Eigen::Index>(sub_column(bi, m, q[m], j));
        }
      }
      for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::Index ci = cols[static_cast<std::size_t>(i)];
        b(i) = sd(ci) * w(ci);
        for (Eigen::Index j = 0; j < k; ++j) {
          const Eigen::Index cj = cols[static_cast<std::size_t>(j)];
          Ks(i, j) = sd(ci) * G(ci, cj) * sd(cj);
        }
        Ks(i, i) += 1.0;
      }
      const Eigen::LLT<CMat> small(Ks);
      const double log_det = log_det0 + 2.0 * small.matrixLLT().diagonal().real().array().log().sum();
      const double quad = quad0 - b.dot(small.solve(b)).real();
      terms(static_cast<Eigen::Index>(r)) = -log_det - quad;
    }
    const double mx = terms.maxCoeff();
    ll(static_cast<Eigen::Index>(s)) = mx + std::log((terms.array() - mx).exp().sum()) - log_sub;
  }
  return ll;
}

RVec MapFilter::predict(const RVec& prev) const {
  RVec cur = prev;
  std::size_t stride = 1;
  const auto U = static_cast<Eigen::Index>(cfg_.U);
  for (std::size_t m = 0; m < cfg_.M; ++m) {
    RVec next = RVec::Zero(cur.size());
    const std::size_t block = stride * cfg_.U;
    for (std::size_t base = 0; base < states_; base += block) {
      for (std::size_t off = 0; off < stride; ++off) {
        RVec line(U);
        for (Eigen::Index u = 0; u < U; ++u) {
          line(u) = cur(static_cast<Eigen::Index>(base + off + static_cast<std::size_t>(u) * stride));
        }
        const RVec moved = temporal_.transpose() * line;
        for (Eigen::Index u = 0; u < U; ++u) {
          next(static_cast<Eigen::Index>(base + off + static_cast<std::size_t>(u) * stride)) = moved(u);
        }
      }
    }
    cur = next;
    stride = block;
  }
  RVec logw(cur.size());
  for (Eigen::Index s = 0; s < cur.size(); ++s) {
    logw(s) = cur(s) > 0.0 ? std::log(cur(s)) + log_spatial_(s) : kNegInf;
  }
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return spatial_prior();
  return normalize_log(logw);
}

RVec MapFilter::step(const CVec& y) {
  const RVec prior = posterior_ ? predict(*posterior_) : spatial_prior();
  RVec logp = log_likelihood(y);
  for (Eigen::Index s = 0; s < logp.size(); ++s) {
    logp(s) = prior(s) > 0.0 ? logp(s) + std::log(prior(s)) : kNegInf;
  }
  posterior_ = normalize_log(logp);
  return *posterior_;
}

BaselineResult dilus(const Scene& scene) {
  return from_tracker(Method::Dilus, track_scene(scene, TrackerOptions{true, true, true}));
}

BaselineResult no_offgrid(const Scene& scene) {
  return from_tracker(Method::NoOffgrid, track_scene(scene, TrackerOptions{true, false, true}));
}

BaselineResult naive_vbi(const Scene& scene) {
  return from_tracker(Method::NaiveVbi, track_scene(scene, TrackerOptions{false, false, false}));
}

BaselineResult lasso_tracker(const Scene& scene) {
  const SensingBuilder builder(scene.grid, scene.dep, scene.pilots, scene.ris, scene.H_rb);
  const BlockScales scales = dictionary_scales(builder);
  const ScaledDictionary d = scaled_dictionary(builder, scales);
  CMat A(d.F.rows(), d.F.cols() + d.Xi.cols());
  A << d.F, d.Xi;
  const SensingLayout& L = builder.layout();
  const auto U = static_cast<Eigen::Index>(L.U);
  BaselineResult r;
  r.method = Method::Lasso;
  for (std::size_t t = 0; t < scene.y.size(); ++t) {
    const CVec yn = scene.y[t] / observation_scale(scene.y[t]);
    const double lambda = scene.cfg.algo.lasso_lambda_scale * (A.adjoint() * yn).cwiseAbs().maxCoeff();
    const LassoResult lr =
        lasso_solve(yn, A, lambda, scene.cfg.algo.lasso_max_iters, scene.cfg.algo.lasso_tol);
    SlotEstimate e;
    e.iterations = lr.iterations;
    e.converged = lr.iterations < scene.cfg.algo.lasso_max_iters;
    for (std::size_t m = 0; m < L.M; ++m) {
      RVec energy = RVec::Zero(U);
      for (Eigen::Index u = 0; u < U; ++u) {
        const auto uu = static_cast<std::size_t>(u);
        energy(u) = std::norm(lr.x(static_cast<Eigen::Index>(L.los_col(Branch::Bs, m, uu))));
        if (L.has_ris) energy(u) += std::norm(lr.x(static_cast<Eigen::Index>(L.los_col(Branch::Ris, m, uu))));
      }
      Eigen::Index best = 0;
      energy.maxCoeff(&best);
      e.q_hat.push_back(static_cast<std::size_t>(best));
      e.position.push_back(scene.grid.point(static_cast<std::size_t>(best), 0.0));
    }
    e.rmse = position_rmse(e.position, scene.traj.position[t]);
    e.rmse_trace = {e.rmse};
    r.slots.push_back(std::move(e));
  }
  return r;
}

BaselineResult map_grid_search(const Scene& scene) {
  MapFilter filter(scene.cfg, scene.grid, scene.dep, scene.pilots, scene.ris, scene.H_rb);
  BaselineResult r;
  r.method = Method::Map;
  for (std::size_t t = 0; t < scene.y.size(); ++t) {
    const RVec post = filter.step(scene.y[t]);
    Eigen::Index best = 0;
    post.maxCoeff(&best);
    SlotEstimate e;
    e.iterations = 1;
    e.q_hat = filter.decode(static_cast<std::size_t>(best));
    for (std::size_t u : e.q_hat) e.position.push_back(scene.grid.point(u, 0.0));
    e.rmse = position_rmse(e.position, scene.traj.position[t]);
    e.rmse_trace = {e.rmse};
    r.slots.push_back(std::move(e));
  }
  return r;
}

BaselineResult run_method(Method m, const Scene& scene) {
  switch (m) {
    case Method::Dilus: return dilus(scene);
    case Method::NoOffgrid: return no_offgrid(scene);
    case Method::NaiveVbi: return naive_vbi(scene);
    case Method::Lasso: return lasso_tracker(scene);
    case Method::Map: return map_grid_search(scene);
    case Method::BsOnly: {
      if (scene.dep.use_ris) fail(ErrorCode::InvalidArgument, "BS-only run needs a scene without the RIS");
      BaselineResult r = dilus(scene);
      r.method = Method::BsOnly;
      return r;
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace platoon
