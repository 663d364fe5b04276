#include "platoon/core/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "platoon/core/error.hpp"

namespace platoon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

RVec normalize_log(const RVec& logw) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) return RVec::Zero(logw.size());
  RVec w = (logw.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
  return w / w.sum();
}

}  // namespace

RVec spatial_transition(std::size_t q_m, const PlatoonParams& params, std::size_t U) {
  if (q_m >= U) fail(ErrorCode::InvalidArgument, "spatial_transition: index outside the grid");
  RVec logw = RVec::Constant(static_cast<Eigen::Index>(U), kNegInf);
  for (std::size_t u = q_m + params.min_gap; u < U; ++u) {
    const double x = static_cast<double>(u - q_m - params.min_gap);
    double lw = -x / params.scale;
    if (params.shape != 1.0) {
      lw = x > 0.0 ? lw + (params.shape - 1.0) * std::log(x) : kNegInf;
    }
    logw(static_cast<Eigen::Index>(u)) = lw;
  }
  return normalize_log(logw);
}

RMat spatial_kernel(const PlatoonParams& params, std::size_t U) {
  RMat S(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(U));
  for (std::size_t q = 0; q < U; ++q) {
    S.row(static_cast<Eigen::Index>(q)) = spatial_transition(q, params, U).transpose();
  }
  return S;
}

RVec temporal_transition(std::size_t q_prev, double mean_speed, double speed_std, double dt,
                         double dL, std::size_t U) {
  if (q_prev >= U) fail(ErrorCode::InvalidArgument, "temporal_transition: index outside the grid");
  const double center = static_cast<double>(q_prev) + mean_speed * dt / dL;
  const double sd = speed_std * dt / dL;
  const auto n = static_cast<Eigen::Index>(U);
  if (!(sd > 0.0)) {
    RVec w = RVec::Zero(n);
    const double r = std::clamp(std::round(center), 0.0, static_cast<double>(U - 1));
    w(static_cast<Eigen::Index>(r)) = 1.0;
    return w;
  }
  RVec logw(n);
  for (Eigen::Index u = 0; u < n; ++u) {
    const double z = (static_cast<double>(u) - center) / sd;
    logw(u) = -0.5 * z * z;
  }
  return normalize_log(logw);
}

RMat temporal_kernel(const ScenarioConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(cfg.U);
  const double quant = cfg.grid_length / cfg.slot_interval;
  const double std_eff =
      std::sqrt(cfg.platoon.speed_std * cfg.platoon.speed_std +
                cfg.platoon.speed_jitter * cfg.platoon.speed_jitter + quant * quant / 6.0);
  RMat T(n, n);
  for (std::size_t q = 0; q < cfg.U; ++q) {
    T.row(static_cast<Eigen::Index>(q)) =
        temporal_transition(q, cfg.platoon.mean_speed, std_eff, cfg.slot_interval,
                            cfg.grid_length, cfg.U)
            .transpose();
  }
  return T;
}

GammaParams precision_prior_params(bool active, const Hyperparams& hyper, PrecisionBranch b) {
  const BranchHyper& h = b == PrecisionBranch::Ris ? hyper.ris
                         : b == PrecisionBranch::Bs ? hyper.bs
                                                    : hyper.nlos;
  return active ? h.active : h.inactive;
}

BernoulliC support_transition(const BernoulliC& c_prev, double rho, const RVec& rate) {
  if (rate.size() != c_prev.size()) fail(ErrorCode::InvalidDimension, "rate size mismatch");
  BernoulliC out = (rate.array() + rho * (c_prev.array() - rate.array())).matrix();
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

BernoulliC support_transition(const BernoulliC& c_prev, double rho, double rate) {
  return support_transition(c_prev, rho, RVec::Constant(c_prev.size(), rate));
}

SlotPriors cross_slot_priors(const std::optional<CategoricalQ>& psi_q_prev,
                             const std::optional<BernoulliC>& psi_c_prev,
                             const RMat& temporal, const RVec& activity_rate, double rho,
                             std::size_t M) {
  const Eigen::Index U = temporal.rows();
  SlotPriors p;
  if (psi_q_prev) {
    if (psi_q_prev->cols() != U) fail(ErrorCode::InvalidDimension, "posterior/kernel size mismatch");
    p.q = *psi_q_prev * temporal;
    for (Eigen::Index m = 0; m < p.q.rows(); ++m) {
      const double s = p.q.row(m).sum();
      if (!(s > 0.0)) fail(ErrorCode::DegeneratePosterior, "predicted location prior has no mass");
      p.q.row(m) /= s;
    }
  } else {
    p.q = RMat::Constant(static_cast<Eigen::Index>(M), U, 1.0 / static_cast<double>(U));
  }
  p.c = psi_c_prev ? support_transition(*psi_c_prev, rho, activity_rate) : activity_rate;
  return p;
}

RVec nlos_activity_rate(const ScenarioConfig& cfg, bool has_ris) {
  const std::size_t nr = has_ris ? cfg.M * cfg.ris_grid_h * cfg.ris_grid_v : 0;
  const std::size_t nb = cfg.M * cfg.bs_grid;
  RVec r(static_cast<Eigen::Index>(nr + nb));
  const double rate_r = static_cast<double>(cfg.nlos.paths_ris) /
                        static_cast<double>(cfg.ris_grid_h * cfg.ris_grid_v);
  const double rate_b = static_cast<double>(cfg.nlos.paths_bs) / static_cast<double>(cfg.bs_grid);
  r.head(static_cast<Eigen::Index>(nr)).setConstant(rate_r);
  r.tail(static_cast<Eigen::Index>(nb)).setConstant(rate_b);
  return r;
}

}  // namespace platoon
