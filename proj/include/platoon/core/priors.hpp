#pragma once

#include <cstddef>
#include <optional>

#include "platoon/core/config.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

// Per-VUE location distributions, M x U with unit row sums.
using CategoricalQ = RMat;
// Per-entry NLoS activity probabilities.
using BernoulliC = RVec;

// Distribution of q_{m+1} given q_m: Gamma density at the integer gap beyond q0.
// All-zero when no successor index fits on the grid.
RVec spatial_transition(std::size_t q_m, const PlatoonParams& params, std::size_t U);
RMat spatial_kernel(const PlatoonParams& params, std::size_t U);

// Discretized Gaussian drift kernel centered at q_prev + v dt / dL.
RVec temporal_transition(std::size_t q_prev, double mean_speed, double speed_std, double dt,
                         double dL, std::size_t U);
// Cell-to-cell kernel of the tracker. Its spread adds the per-VUE speed jitter
// and the variance 1/6 cell^2 of an index change caused by a uniform in-cell offset.
RMat temporal_kernel(const ScenarioConfig& cfg);

enum class PrecisionBranch { Ris, Bs, Nlos };

GammaParams precision_prior_params(bool active, const Hyperparams& hyper, PrecisionBranch b);

// Two-state Markov step with stationary activity `rate` and lag-one correlation rho.
BernoulliC support_transition(const BernoulliC& c_prev, double rho, const RVec& rate);
BernoulliC support_transition(const BernoulliC& c_prev, double rho, double rate);

struct SlotPriors {
  CategoricalQ q;
  BernoulliC c;
};

// Predictive priors for slot t from the slot t-1 posteriors; uniform q and the
// stationary activity when no previous posterior exists.
SlotPriors cross_slot_priors(const std::optional<CategoricalQ>& psi_q_prev,
                             const std::optional<BernoulliC>& psi_c_prev,
                             const RMat& temporal, const RVec& activity_rate, double rho,
                             std::size_t M);

// Stationary activity rate per NLoS column (RIS block then BS block).
RVec nlos_activity_rate(const ScenarioConfig& cfg, bool has_ris);

}  // namespace platoon
