#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "platoon/core/channel.hpp"
#include "platoon/core/tracker.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

enum class Method { Dilus, NoOffgrid, NaiveVbi, Lasso, Map, BsOnly };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// One slot of any estimator, in the shape of the tracker output.
struct SlotEstimate {
  std::vector<Position3> position;
  std::vector<std::size_t> q_hat;
  std::size_t iterations = 0;
  bool converged = true;
  double rmse = 0.0;
  std::vector<double> rmse_trace;
};

struct BaselineResult {
  Method method = Method::Dilus;
  std::vector<SlotEstimate> slots;
};

// ISTA on 0.5 ||y - A x||^2 + lambda ||x||_1 with step 1 / ||A||_op^2; stops when
// ||x_new - x|| <= tol ||x_new|| or after max_iters.
struct LassoResult {
  CVec x;
  std::size_t iterations = 0;
  std::vector<double> objective;  // filled when requested
};

LassoResult lasso_solve(const CVec& y, const CMat& A, double lambda, std::size_t max_iters,
                        double tol = 1e-6, bool record_objective = false);

// Complex soft threshold x * max(0, 1 - lambda / |x|).
CVec soft_threshold(const CVec& x, double lambda);

double lasso_objective(const CVec& y, const CMat& A, const CVec& x, double lambda);

// Exact Bayesian filter over joint grid assignments. The likelihood of an
// assignment averages, over map_subcells evenly spaced road offsets per cell,
// the Gaussian marginal of y with LoS gain variances from the path-loss law,
// the NLoS prior covariance and the known noise.
class MapFilter {
 public:
  MapFilter(const ScenarioConfig& cfg, const GridSpec& grid, const Deployment& dep,
            const CMat& pilots, const RisProfile& ris, const CMat& H_rb);

  // Log-likelihood of every joint state for observation y; state index
  // s = sum_m q_m U^m.
  RVec log_likelihood(const CVec& y) const;
  // Normalized joint prior of the chain model without history.
  RVec spatial_prior() const;
  // Posterior over joint states after observing y.
  RVec step(const CVec& y);
  void reset() { posterior_.reset(); }

  std::size_t states() const { return states_; }
  std::vector<std::size_t> decode(std::size_t s) const;

 private:
  RVec predict(const RVec& prev) const;
  std::size_t sub_column(std::size_t branch, std::size_t m, std::size_t u, std::size_t j) const;

  ScenarioConfig cfg_;
  GridSpec grid_;
  SensingBuilder builder_;
  BlockScales scales_;
  RMat spatial_;
  RMat temporal_;
  std::size_t states_ = 0;
  RVec log_spatial_;
  CMat dictionary_;       // scaled LoS columns at every sub-cell offset
  CMat nlos_dictionary_;  // scaled NLoS columns at zero offsets
  RVec los_variance_;     // per dictionary_ column, before the observation scaling
  RVec nlos_variance_;
  std::optional<RVec> posterior_;
};

BaselineResult naive_vbi(const Scene& scene);
BaselineResult no_offgrid(const Scene& scene);
BaselineResult dilus(const Scene& scene);
BaselineResult lasso_tracker(const Scene& scene);
BaselineResult map_grid_search(const Scene& scene);

// Runs a method on the scene; BsOnly expects a scene simulated without the RIS.
BaselineResult run_method(Method m, const Scene& scene);

}  // namespace platoon
