#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include "platoon/core/config.hpp"
#include "platoon/core/priors.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

struct GaussianPosterior {
  CVec mean;
  CMat cov;

  Eigen::Index size() const { return mean.size(); }
  // E|x_i|^2 for every entry.
  RVec second_moment() const;
};

struct GammaPosterior {
  RVec shape;
  RVec rate;

  RVec mean() const { return (shape.array() / rate.array()).matrix(); }
  // E[ln x] = digamma(shape) - ln(rate).
  RVec log_mean() const;
};

// One slot of the CS model, y = F_R z_R + F_B z_B + Xi v + n. F_R has zero
// columns for a BS-only deployment. LoS blocks are ordered m*U + u.
struct LinearModel {
  CVec y;
  CMat F_R;
  CMat F_B;
  CMat Xi;
  std::size_t M = 0;
  std::size_t U = 0;

  // Caches the stacked dictionary and Gram matrices; call after the dictionaries change.
  void prepare();
  bool has_ris() const { return F_R.cols() > 0; }

  CMat A;  // [F_R F_B Xi]
  CMat gram;
  CMat gram_R;
  CMat gram_B;
  CMat gram_X;
};

struct PosteriorSet {
  GaussianPosterior z_R;
  GaussianPosterior z_B;
  GaussianPosterior v;
  GammaPosterior rho_R;
  GammaPosterior rho_B;
  GammaPosterior gamma;
  GammaPosterior kappa;
  CategoricalQ q;
  BernoulliC c;
  // Covariance of the stacked coefficients [z_R; z_B; v]; block diagonal when the
  // Gaussian factors are updated separately.
  CMat joint_cov;

  CVec stacked_mean() const;
};

struct MessageSet {
  RMat nu_in;     // Entity A -> B
  RMat nu_out;    // Entity B -> A
  RMat forward;   // message into VUE m from VUE m-1
  RMat backward;  // message into VUE m from VUE m+1
};

struct VbiOptions {
  bool structured = true;  // group-sparse and Markov priors; false gives flat i.i.d. precisions
  bool learn_precisions = true;
  bool learn_noise = true;
  bool joint = true;       // one Gaussian factor over all coefficients
  bool cross_term = true;  // only used by the per-branch updates
  double tol = 1e-4;
  std::size_t max_sweeps = 100;
};

// Inverse of a Hermitian positive-definite matrix via Cholesky with escalating jitter.
CMat hermitian_inverse(const CMat& A);

// Sigma = (diag(prec) + kappa F^H F)^-1, mu = kappa Sigma F^H residual.
GaussianPosterior gaussian_block_update(const CMat& F, const CMat& gram, const CVec& residual,
                                        const RVec& prior_precision, double kappa);

std::pair<GaussianPosterior, GaussianPosterior> update_z(const LinearModel& model,
                                                         const CVec& mean_v,
                                                         const RVec& rho_R_mean,
                                                         const RVec& rho_B_mean, double kappa,
                                                         const CVec& z_B_current,
                                                         bool cross_term);

// Exact Gaussian posterior of [z_R; z_B; v] given the precisions; fills the
// three blocks and post.joint_cov.
void update_joint(const LinearModel& model, const RVec& rho_R_mean, const RVec& rho_B_mean,
                  const RVec& gamma_mean, double kappa, PosteriorSet& post);

// Block-diagonal joint covariance from the separate factors.
CMat block_diagonal_cov(const PosteriorSet& post);

GaussianPosterior update_v(const LinearModel& model, const CVec& mean_z_R, const CVec& mean_z_B,
                           const RVec& gamma_mean, double kappa);

// Gamma update of LoS precisions; pi holds the location posterior (M x U).
GammaPosterior update_rho(const CategoricalQ& pi, const GaussianPosterior& z,
                          const BranchHyper& hyper);
GammaPosterior update_gamma(const BernoulliC& pi, const GaussianPosterior& v,
                            const BranchHyper& hyper);
// Flat prior variant used by the i.i.d. baseline.
GammaPosterior update_precision_iid(const GaussianPosterior& x, const GammaParams& prior);

GammaPosterior update_kappa(const LinearModel& model, const PosteriorSet& post,
                            const GammaParams& prior);

// Location posterior from the chain message and the Gamma evidence of both branches.
CategoricalQ update_q(const RMat& nu_out, const Hyperparams& hyper, const GammaPosterior* rho_R,
                      const GammaPosterior& rho_B, std::size_t M, std::size_t U);

BernoulliC update_c(const BernoulliC& prior_c, const BranchHyper& nlos,
                    const GammaPosterior& gamma);

// Exact sum-product over the platoon chain. nu_in and temporal are M x U,
// spatial(u, u') = p(q_{m+1} = u' | q_m = u).
MessageSet forward_backward_q(const RMat& nu_in, const RMat& spatial, const RMat& temporal);

// nu_in = psi / nu_out with uniform mass where nu_out < 1e-12, rows normalized.
RMat message_ratio(const CategoricalQ& psi, const RMat& nu_out);

struct EStepResult {
  PosteriorSet post;
  MessageSet msg;
  bool converged = false;
  std::size_t sweeps = 0;
};

// Cold-start posteriors: precisions at the active prior mean, zero means.
PosteriorSet initial_posteriors(const LinearModel& model, const CategoricalQ& q0,
                                const BernoulliC& c0, const Hyperparams& hyper,
                                const VbiOptions& opt);

EStepResult e_step(const LinearModel& model, const CategoricalQ& prior_q, const BernoulliC& prior_c,
                   const RMat& spatial, const Hyperparams& hyper, const VbiOptions& opt,
                   const std::optional<PosteriorSet>& warm = std::nullopt);

// Negative ELBO of the Gaussian layers with the precisions held at the given
// values; the noise precision is either fixed at post.kappa's mean or carries
// its Gamma factor.
double gaussian_free_energy(const LinearModel& model, const PosteriorSet& post,
                            const RVec& prec_R, const RVec& prec_B, const RVec& prec_v,
                            const std::optional<GammaParams>& noise_prior);

// ||a - b|| / ||b|| with 0 when both vanish.
double relative_change(const CVec& a, const CVec& b);
double relative_change(const CMat& a, const CMat& b);

}  // namespace platoon
