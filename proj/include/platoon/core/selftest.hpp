#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace platoon {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct GdopCheck {
  double half_error = 0.0;               // |gdop_combined(g, g) - g / 2| over sample values
  std::size_t combined_violations = 0;  // raster points with BS+RIS above BS
  std::size_t raster_points = 0;
  double exponent_error = 0.0;  // worst log-ratio exponent deviation of gdop_ula
};
GdopCheck gdop_check();

// Worst relative gap between the finite-difference FIM of a ULA response and
// the closed form over omega in [-70, 70] degrees and K in {2, 8, 16}.
double fim_oracle_error();

// Median relative gap between the numeric azimuth FIM of the pilot-stacked
// cascaded observation and G times the closed form, over random Rician BS-RIS
// draws with K = 64 and fresh per-pilot RIS phases.
double cascaded_median_deviation(std::uint64_t seed, std::size_t draws = 100);

struct ConjugacyCheck {
  double joint_mean_error = 0.0;
  double joint_cov_error = 0.0;
  double blockwise_mean_error = 0.0;  // separate Gaussian factors at their fixed point
};
// Linear-Gaussian toy with 8 observations and 4 coefficients, precisions fixed.
ConjugacyCheck conjugacy_check(std::uint64_t seed);

// Worst absolute gap between chain marginals from the message passing and
// exhaustive enumeration over random instances with U <= 5 and M <= 4.
double chain_marginal_error(std::uint64_t seed, std::size_t instances = 50);

// Worst relative residual ||y - (F z + Xi v)|| / ||y|| of noiseless observations
// against the ground-truth sparse vectors and offsets over random desk scenes.
double sensing_residual(std::uint64_t seed, std::size_t scenes = 100);

struct SurrogateCheck {
  double fd_error = 0.0;  // gradient with step h against step h / 10
  std::size_t armijo_steps = 0;
  std::size_t armijo_violations = 0;
  double vertex_error = 0.0;  // repeated ascent on a concave quadratic
};
SurrogateCheck surrogate_check(std::uint64_t seed, std::size_t armijo_steps = 10000);

// The fast oracle and property checks with the pinned tolerances.
std::vector<CheckResult> run_selftests(std::uint64_t seed);

}  // namespace platoon
