#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "platoon/core/channel.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/geometry.hpp"
#include "platoon/core/priors.hpp"
#include "platoon/core/sensing.hpp"
#include "platoon/core/vbi.hpp"

namespace platoon {

// Fixed per-block column scaling: dividing by it gives unit mean column norm.
struct BlockScales {
  double los_ris = 1.0;
  double los_bs = 1.0;
  double nlos_ris = 1.0;
  double nlos_bs = 1.0;
};

BlockScales dictionary_scales(const SensingBuilder& builder);

// Normalized LinearModel for observation y at the given offsets; y is divided
// by ||y|| / sqrt(len) and every block by its scale.
LinearModel normalized_model(const SensingBuilder& builder, const BlockScales& scales,
                             const CVec& y, const OffsetEstimate& offsets);

enum class CoordKind { Road, Omega, Phi, Theta };

// One scalar off-grid parameter updated by the M-step.
struct OffsetCoord {
  CoordKind kind = CoordKind::Road;
  std::size_t m = 0;
  std::size_t index = 0;  // grid u, AoA k or RIS angle pair n
  double bound = 0.0;     // admissible half-width
};

double get_coord(const OffsetEstimate& o, const OffsetCoord& c);
void set_coord(OffsetEstimate& o, const OffsetCoord& c, double value);

// Top-p locations per VUE by the location posterior and the strongest active NLoS
// entries per VUE and branch.
std::vector<OffsetCoord> select_coordinates(const PosteriorSet& post, const SensingLayout& layout,
                                            const GridSpec& grid, std::size_t top_p,
                                            std::size_t nlos_top);

// Free energy of the normalized model as a function of the off-grid
// parameters, with the precision factors held fixed and the Gaussian factor of
// the coefficients at its optimum: -ln det C - y^H C^-1 y with
// C = I / E[kappa] + A diag(1 / E[precision]) A^H, up to an additive constant.
// Evaluations away from the base offsets use a low-rank update of C^-1.
class Surrogate {
 public:
  Surrogate(const SensingBuilder& builder, const BlockScales& scales, const LinearModel& model,
            const PosteriorSet& post, const OffsetEstimate& base);

  double value() const { return base_value_; }
  // Value after replacing the listed coordinates by x.
  double value_at(const std::vector<OffsetCoord>& coords, const RVec& x) const;
  // Central differences with step 1e-5 of the bound, one-sided at the box edges.
  RVec gradient(const std::vector<OffsetCoord>& coords, const RVec& x) const;
  const OffsetEstimate& base() const { return base_; }

 private:
  struct ColumnRef {
    int block;  // 0 RIS LoS, 1 BS LoS, 2 NLoS
    Eigen::Index col;
  };
  CVec column(const ColumnRef& ref, const OffsetEstimate& o) const;
  Eigen::Index global_index(const ColumnRef& ref) const;
  std::vector<ColumnRef> affected(const OffsetCoord& c) const;

  const SensingBuilder& builder_;
  BlockScales scales_;
  const LinearModel& model_;
  OffsetEstimate base_;
  RVec variance_;  // prior variance of every coefficient
  CMat cinv_;
  CVec weighted_y_;
  double log_det_ = 0.0;
  double quad_ = 0.0;
  double base_value_ = 0.0;
};

struct ArmijoResult {
  RVec x;
  double f_start = 0.0;
  double f_end = 0.0;
  std::size_t backtracks = 0;
  bool moved = false;
};

// One projected ascent step on the box |x_i| <= bound_i, in coordinates scaled
// by the bounds, with the direction normalized to unit max-norm.
ArmijoResult armijo_ascent(const std::function<double(const RVec&)>& f,
                           const std::function<RVec(const RVec&)>& grad, const RVec& x0,
                           const RVec& bound, const ArmijoParams& params);

struct MStepResult {
  RVec x;
  std::vector<double> trace;  // objective after every accepted step, starting value first
  std::size_t steps = 0;
};

// Repeated Armijo steps on a fixed objective until a step fails to move or
// max_steps is reached.
MStepResult m_step(const std::function<double(const RVec&)>& f,
                   const std::function<RVec(const RVec&)>& grad, const RVec& x0,
                   const RVec& bound, const ArmijoParams& params, std::size_t max_steps);

struct TrackerOptions {
  bool structured = true;  // false runs the i.i.d. prior without chains
  bool offgrid = true;
  bool temporal = true;
};

struct SlotResult {
  std::vector<std::size_t> q_hat;
  std::vector<double> road_offset;
  std::vector<Position3> position;
  CategoricalQ psi_q;
  BernoulliC psi_c;
  OffsetEstimate offsets;
  std::size_t iterations = 0;
  std::size_t vbi_sweeps = 0;
  bool converged = false;
  std::vector<double> surrogate_trace;  // surrogate after every M-step
  std::vector<double> surrogate_gain;   // increase achieved by every M-step
  std::vector<double> rmse_trace;  // filled when the true positions are supplied
  double rmse = 0.0;
};

double position_rmse(const std::vector<Position3>& est, const std::vector<Position3>& truth);

class Tracker {
 public:
  Tracker(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep,
          const CMat& pilots, const RisProfile& ris, const CMat& H_rb, TrackerOptions opt);

  SlotResult step(const CVec& y, const std::vector<Position3>* truth = nullptr);
  void reset();

  const SensingBuilder& builder() const { return builder_; }
  const BlockScales& scales() const { return scales_; }

 private:
  std::vector<Position3> estimate_positions(const CategoricalQ& q, const OffsetEstimate& o,
                                            std::vector<std::size_t>& q_hat,
                                            std::vector<double>& offsets) const;

  ScenarioConfig cfg_;
  GridSpec grid_;
  TrackerOptions opt_;
  SensingBuilder builder_;
  BlockScales scales_;
  RMat spatial_;
  RMat temporal_;
  RVec activity_;
  std::optional<CategoricalQ> prev_q_;
  std::optional<BernoulliC> prev_c_;
};

std::vector<SlotResult> track_scene(const Scene& scene, TrackerOptions opt);

// Locations from mean LoS energy per grid point, uniform when everything vanishes.
CategoricalQ energy_location_posterior(const PosteriorSet& post, std::size_t M, std::size_t U);

}  // namespace platoon
