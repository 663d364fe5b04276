#include "platoon/core/vbi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <boost/math/special_functions/digamma.hpp>

#include "platoon/core/error.hpp"

namespace platoon {

namespace {

using boost::math::digamma;

RVec row_normalized(const RVec& w) {
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) {
    fail(ErrorCode::DegenerateMessage, "message has no finite positive mass");
  }
  return w / s;
}

RVec prior_mixture_shape(const RVec& pi, const GammaParams& act, const GammaParams& inact) {
  return (pi.array() * act.shape + (1.0 - pi.array()) * inact.shape).matrix();
}

RVec prior_mixture_rate(const RVec& pi, const GammaParams& act, const GammaParams& inact) {
  return (pi.array() * act.rate + (1.0 - pi.array()) * inact.rate).matrix();
}

RVec flatten_rows(const RMat& m) {
  RVec out(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.segment(r * m.cols(), m.cols()) = m.row(r).transpose();
  return out;
}

GaussianPosterior empty_gaussian() { return {CVec(0), CMat(0, 0)}; }

double expected_residual(const LinearModel& model, const PosteriorSet& post) {
  const CVec r = model.y - model.A * post.stacked_mean();
  if (post.joint_cov.rows() != model.A.cols()) fail(ErrorCode::InvalidDimension, "joint covariance size mismatch");
  return r.squaredNorm() + model.gram.cwiseProduct(post.joint_cov.transpose()).sum().real();
}

double gamma_log_norm(double a, double b) { return a * std::log(b) - std::lgamma(a); }

double log_det_hpd(const CMat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::LLT<CMat> llt(A);
  if (llt.info() != Eigen::Success) fail(ErrorCode::Numerical, "covariance is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
}

}  // namespace

RVec GaussianPosterior::second_moment() const {
  return (mean.array().abs2() + cov.diagonal().real().array()).matrix();
}

RVec GammaPosterior::log_mean() const {
  RVec out(shape.size());
  for (Eigen::Index i = 0; i < shape.size(); ++i) out(i) = digamma(shape(i)) - std::log(rate(i));
  return out;
}

void LinearModel::prepare() {
  if (F_B.rows() != y.size() || Xi.rows() != y.size() || (F_R.cols() > 0 && F_R.rows() != y.size())) {
    fail(ErrorCode::InvalidDimension, "dictionary rows must match the observation length");
  }
  if (static_cast<std::size_t>(F_B.cols()) != M * U ||
      (F_R.cols() > 0 && static_cast<std::size_t>(F_R.cols()) != M * U)) {
    fail(ErrorCode::InvalidDimension, "LoS blocks must have M*U columns");
  }
  A.resize(y.size(), F_R.cols() + F_B.cols() + Xi.cols());
  A << F_R, F_B, Xi;
  gram = A.adjoint() * A;
  const Eigen::Index nr = F_R.cols(), nb = F_B.cols(), nx = Xi.cols();
  gram_R = gram.block(0, 0, nr, nr);
  gram_B = gram.block(nr, nr, nb, nb);
  gram_X = gram.block(nr + nb, nr + nb, nx, nx);
}

CVec PosteriorSet::stacked_mean() const {
  CVec m(z_R.size() + z_B.size() + v.size());
  m << z_R.mean, z_B.mean, v.mean;
  return m;
}

CMat block_diagonal_cov(const PosteriorSet& post) {
  const Eigen::Index nr = post.z_R.size(), nb = post.z_B.size(), nx = post.v.size();
  CMat c = CMat::Zero(nr + nb + nx, nr + nb + nx);
  c.block(0, 0, nr, nr) = post.z_R.cov;
  c.block(nr, nr, nb, nb) = post.z_B.cov;
  c.block(nr + nb, nr + nb, nx, nx) = post.v.cov;
  return c;
}

void update_joint(const LinearModel& model, const RVec& rho_R_mean, const RVec& rho_B_mean,
                  const RVec& gamma_mean, double kappa, PosteriorSet& post) {
  const Eigen::Index nr = model.F_R.cols(), nb = model.F_B.cols(), nx = model.Xi.cols();
  if (rho_R_mean.size() != nr || rho_B_mean.size() != nb || gamma_mean.size() != nx) {
    fail(ErrorCode::InvalidDimension, "precision size mismatch");
  }
  RVec prec(nr + nb + nx);
  prec << rho_R_mean, rho_B_mean, gamma_mean;
  const CVec residual = model.y;
  GaussianPosterior g = gaussian_block_update(model.A, model.gram, residual, prec, kappa);
  post.z_R = {g.mean.head(nr), g.cov.block(0, 0, nr, nr)};
  post.z_B = {g.mean.segment(nr, nb), g.cov.block(nr, nr, nb, nb)};
  post.v = {g.mean.tail(nx), g.cov.block(nr + nb, nr + nb, nx, nx)};
  post.joint_cov = std::move(g.cov);
}

CMat hermitian_inverse(const CMat& A) {
  const Eigen::Index n = A.rows();
  if (n != A.cols()) fail(ErrorCode::InvalidDimension, "matrix must be square");
  if (n == 0) return CMat(0, 0);
  if (!A.allFinite()) fail(ErrorCode::Numerical, "matrix has non-finite entries");
  const CMat H = 0.5 * (A + A.adjoint());
  double jitter = 1e-10 * std::abs(H.trace().real()) / static_cast<double>(n);
  if (!(jitter > 0.0)) jitter = 1e-300;
  for (int attempt = 0; attempt < 4; ++attempt, jitter *= 10.0) {
    CMat J = H;
    J.diagonal().array() += jitter;
    Eigen::LLT<CMat> llt(J);
    if (llt.info() != Eigen::Success) continue;
    CMat inv = llt.solve(CMat::Identity(n, n));
    if (!inv.allFinite()) continue;
    return 0.5 * (inv + inv.adjoint());
  }
  fail(ErrorCode::Conditioning, "Cholesky failed after jitter escalation");
}

GaussianPosterior gaussian_block_update(const CMat& F, const CMat& gram, const CVec& residual,
                                        const RVec& prior_precision, double kappa) {
  if (F.cols() == 0) return empty_gaussian();
  if (prior_precision.size() != F.cols()) fail(ErrorCode::InvalidDimension, "precision size mismatch");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorCode::InvalidArgument, "noise precision must be positive");
  if ((prior_precision.array() <= 0.0).any() || !prior_precision.allFinite()) {
    fail(ErrorCode::InvalidArgument, "prior precisions must be positive and finite");
  }
  CMat P = kappa * gram;
  P.diagonal() += prior_precision.cast<cd>();
  GaussianPosterior g;
  g.cov = hermitian_inverse(P);
  g.mean = kappa * (g.cov * (F.adjoint() * residual));
  return g;
}

std::pair<GaussianPosterior, GaussianPosterior> update_z(const LinearModel& model,
                                                         const CVec& mean_v,
                                                         const RVec& rho_R_mean,
                                                         const RVec& rho_B_mean, double kappa,
                                                         const CVec& z_B_current,
                                                         bool cross_term) {
  const CVec base = model.y - model.Xi * mean_v;
  GaussianPosterior zr = empty_gaussian();
  if (model.has_ris()) {
    const CVec r = cross_term ? CVec(base - model.F_B * z_B_current) : base;
    zr = gaussian_block_update(model.F_R, model.gram_R, r, rho_R_mean, kappa);
  }
  CVec rb = base;
  if (cross_term && model.has_ris()) rb -= model.F_R * zr.mean;
  GaussianPosterior zb = gaussian_block_update(model.F_B, model.gram_B, rb, rho_B_mean, kappa);
  return {std::move(zr), std::move(zb)};
}

GaussianPosterior update_v(const LinearModel& model, const CVec& mean_z_R, const CVec& mean_z_B,
                           const RVec& gamma_mean, double kappa) {
  CVec r = model.y - model.F_B * mean_z_B;
  if (model.has_ris()) r -= model.F_R * mean_z_R;
  return gaussian_block_update(model.Xi, model.gram_X, r, gamma_mean, kappa);
}

GammaPosterior update_rho(const CategoricalQ& pi, const GaussianPosterior& z,
                          const BranchHyper& hyper) {
  const RVec p = flatten_rows(pi);
  if (p.size() != z.size()) fail(ErrorCode::InvalidDimension, "location posterior does not match block size");
  GammaPosterior g;
  g.shape = (prior_mixture_shape(p, hyper.active, hyper.inactive).array() + 1.0).matrix();
  g.rate = prior_mixture_rate(p, hyper.active, hyper.inactive) + z.second_moment();
  return g;
}

GammaPosterior update_gamma(const BernoulliC& pi, const GaussianPosterior& v,
                            const BranchHyper& hyper) {
  if (pi.size() != v.size()) fail(ErrorCode::InvalidDimension, "activity posterior does not match block size");
  GammaPosterior g;
  g.shape = (prior_mixture_shape(pi, hyper.active, hyper.inactive).array() + 1.0).matrix();
  g.rate = prior_mixture_rate(pi, hyper.active, hyper.inactive) + v.second_moment();
  return g;
}

GammaPosterior update_precision_iid(const GaussianPosterior& x, const GammaParams& prior) {
  GammaPosterior g;
  g.shape = RVec::Constant(x.size(), prior.shape + 1.0);
  g.rate = (x.second_moment().array() + prior.rate).matrix();
  return g;
}

GammaPosterior update_kappa(const LinearModel& model, const PosteriorSet& post,
                            const GammaParams& prior) {
  GammaPosterior g;
  g.shape = RVec::Constant(1, prior.shape + static_cast<double>(model.y.size()));
  g.rate = RVec::Constant(1, prior.rate + expected_residual(model, post));
  return g;
}

CategoricalQ update_q(const RMat& nu_out, const Hyperparams& hyper, const GammaPosterior* rho_R,
                      const GammaPosterior& rho_B, std::size_t M, std::size_t U) {
  const auto Mi = static_cast<Eigen::Index>(M);
  const auto Ui = static_cast<Eigen::Index>(U);
  if (nu_out.rows() != Mi || nu_out.cols() != Ui) fail(ErrorCode::InvalidDimension, "nu_out must be M x U");
  struct Term {
    const GammaPosterior* rho;
    const BranchHyper* h;
  };
  std::vector<Term> terms;
  if (rho_R) terms.push_back({rho_R, &hyper.ris});
  terms.push_back({&rho_B, &hyper.bs});
  std::vector<RVec> lm, mn;
  for (const auto& t : terms) {
    if (t.rho->shape.size() != Mi * Ui) fail(ErrorCode::InvalidDimension, "precision block size mismatch");
    lm.push_back(t.rho->log_mean());
    mn.push_back(t.rho->mean());
  }
  CategoricalQ q(Mi, Ui);
  for (Eigen::Index m = 0; m < Mi; ++m) {
    RVec logw(Ui);
    for (Eigen::Index u = 0; u < Ui; ++u) {
      const Eigen::Index i = m * Ui + u;
      double ev = 0.0;
      for (std::size_t b = 0; b < terms.size(); ++b) {
        const BranchHyper& h = *terms[b].h;
        ev += (h.active.shape - h.inactive.shape) * lm[b](i) -
              (h.active.rate - h.inactive.rate) * mn[b](i);
      }
      const double prior = nu_out(m, u);
      logw(u) = prior > 0.0 ? std::log(prior) + ev : -std::numeric_limits<double>::infinity();
    }
    const double mx = logw.maxCoeff();
    if (!std::isfinite(mx)) fail(ErrorCode::DegeneratePosterior, "location posterior has no mass");
    const RVec w = (logw.array() - mx).unaryExpr([](double v) { return std::exp(v); }).matrix();
    q.row(m) = row_normalized(w).transpose();
  }
  return q;
}

BernoulliC update_c(const BernoulliC& prior_c, const BranchHyper& nlos,
                    const GammaPosterior& gamma) {
  if (prior_c.size() != gamma.shape.size()) fail(ErrorCode::InvalidDimension, "activity prior size mismatch");
  const RVec lm = gamma.log_mean();
  const RVec mn = gamma.mean();
  const GammaParams& a = nlos.active;
  const GammaParams& b = nlos.inactive;
  const double norm = gamma_log_norm(a.shape, a.rate) - gamma_log_norm(b.shape, b.rate);
  BernoulliC c(prior_c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double p = prior_c(i);
    if (p <= 0.0) {
      c(i) = 0.0;
      continue;
    }
    if (p >= 1.0) {
      c(i) = 1.0;
      continue;
    }
    const double delta = norm + (a.shape - b.shape) * lm(i) - (a.rate - b.rate) * mn(i);
    const double logit = std::log(p) - std::log1p(-p) + delta;
    c(i) = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  }
  return c;
}

MessageSet forward_backward_q(const RMat& nu_in, const RMat& spatial, const RMat& temporal) {
  const Eigen::Index M = nu_in.rows();
  const Eigen::Index U = nu_in.cols();
  if (temporal.rows() != M || temporal.cols() != U || spatial.rows() != U || spatial.cols() != U) {
    fail(ErrorCode::InvalidDimension, "chain inputs have inconsistent sizes");
  }
  if ((nu_in.array() < 0.0).any() || (temporal.array() < 0.0).any()) {
    fail(ErrorCode::InvalidArgument, "messages must be non-negative");
  }
  const RMat phi = nu_in.cwiseProduct(temporal);
  MessageSet out;
  out.nu_in = nu_in;
  out.forward = RMat::Ones(M, U);
  out.backward = RMat::Ones(M, U);
  out.forward.row(0).setConstant(1.0 / static_cast<double>(U));
  out.backward.row(M - 1).setConstant(1.0 / static_cast<double>(U));
  for (Eigen::Index m = 1; m < M; ++m) {
    const RVec w = out.forward.row(m - 1).transpose().cwiseProduct(phi.row(m - 1).transpose());
    out.forward.row(m) = row_normalized(spatial.transpose() * w).transpose();
  }
  for (Eigen::Index m = M - 2; m >= 0; --m) {
    const RVec w = out.backward.row(m + 1).transpose().cwiseProduct(phi.row(m + 1).transpose());
    out.backward.row(m) = row_normalized(spatial * w).transpose();
  }
  out.nu_out.resize(M, U);
  for (Eigen::Index m = 0; m < M; ++m) {
    const RVec w = out.forward.row(m).transpose().cwiseProduct(out.backward.row(m).transpose())
                       .cwiseProduct(temporal.row(m).transpose());
    out.nu_out.row(m) = row_normalized(w).transpose();
  }
  return out;
}

RMat message_ratio(const CategoricalQ& psi, const RMat& nu_out) {
  if (psi.rows() != nu_out.rows() || psi.cols() != nu_out.cols()) {
    fail(ErrorCode::InvalidDimension, "message sizes differ");
  }
  const Eigen::Index U = psi.cols();
  RMat out(psi.rows(), U);
  for (Eigen::Index m = 0; m < psi.rows(); ++m) {
    RVec r(U);
    std::vector<bool> guarded(static_cast<std::size_t>(U), false);
    Eigen::Index nvalid = 0;
    for (Eigen::Index u = 0; u < U; ++u) {
      if (nu_out(m, u) < 1e-12) {
        guarded[static_cast<std::size_t>(u)] = true;
        r(u) = 0.0;
      } else {
        r(u) = psi(m, u) / nu_out(m, u);
        ++nvalid;
      }
    }
    const double s = r.sum();
    const double uniform = 1.0 / static_cast<double>(U);
    if (s > 0.0) {
      r *= static_cast<double>(nvalid) * uniform / s;
    } else {
      r.setZero();
      std::fill(guarded.begin(), guarded.end(), true);
    }
    for (Eigen::Index u = 0; u < U; ++u) {
      if (guarded[static_cast<std::size_t>(u)]) r(u) = uniform;
    }
    out.row(m) = row_normalized(r).transpose();
  }
  return out;
}

PosteriorSet initial_posteriors(const LinearModel& model, const CategoricalQ& q0,
                                const BernoulliC& c0, const Hyperparams& hyper,
                                const VbiOptions& opt) {
  const Eigen::Index nz = static_cast<Eigen::Index>(model.M * model.U);
  const Eigen::Index nv = model.Xi.cols();
  PosteriorSet p;
  p.q = q0;
  p.c = c0;
  auto init_gamma = [&](const BranchHyper& h, Eigen::Index n) {
    GammaPosterior g;
    if (opt.structured) {
      g.shape = RVec::Constant(n, h.active.shape);
      g.rate = RVec::Constant(n, h.active.rate);
    } else {
      g.shape = RVec::Constant(n, hyper.iid.shape);
      g.rate = RVec::Constant(n, hyper.iid.rate);
    }
    return g;
  };
  if (model.has_ris()) p.rho_R = init_gamma(hyper.ris, nz);
  else p.rho_R = {RVec(0), RVec(0)};
  p.rho_B = init_gamma(hyper.bs, nz);
  p.gamma = init_gamma(hyper.nlos, nv);
  auto init_gauss = [](const GammaPosterior& g) {
    GaussianPosterior x;
    x.mean = CVec::Zero(g.shape.size());
    x.cov = g.mean().cwiseInverse().cast<cd>().asDiagonal();
    return x;
  };
  p.z_R = init_gauss(p.rho_R);
  p.z_B = init_gauss(p.rho_B);
  p.v = init_gauss(p.gamma);
  p.joint_cov = block_diagonal_cov(p);
  const double kg = static_cast<double>(model.y.size());
  p.kappa.shape = RVec::Constant(1, hyper.noise.shape + kg);
  p.kappa.rate = RVec::Constant(1, hyper.noise.rate + 0.01 * model.y.squaredNorm());
  return p;
}

double relative_change(const CVec& a, const CVec& b) {
  const double nb = b.norm();
  const double d = (a - b).norm();
  if (nb == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return d / nb;
}

double relative_change(const CMat& a, const CMat& b) {
  const double nb = b.norm();
  const double d = (a - b).norm();
  if (nb == 0.0) return d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return d / nb;
}

EStepResult e_step(const LinearModel& model, const CategoricalQ& prior_q, const BernoulliC& prior_c,
                   const RMat& spatial, const Hyperparams& hyper, const VbiOptions& opt,
                   const std::optional<PosteriorSet>& warm) {
  const auto M = static_cast<Eigen::Index>(model.M);
  const auto U = static_cast<Eigen::Index>(model.U);
  if (prior_q.rows() != M || prior_q.cols() != U) fail(ErrorCode::InvalidDimension, "prior_q must be M x U");
  if (prior_c.size() != model.Xi.cols()) fail(ErrorCode::InvalidDimension, "prior_c size mismatch");
  if (!model.y.allFinite()) fail(ErrorCode::Numerical, "observation has non-finite entries");

  EStepResult res;
  if (opt.structured) {
    res.msg = forward_backward_q(RMat::Constant(M, U, 1.0 / static_cast<double>(U)), spatial, prior_q);
  } else {
    res.msg.nu_out = prior_q;
    res.msg.nu_in = RMat::Constant(M, U, 1.0 / static_cast<double>(U));
  }
  if (warm) {
    res.post = *warm;
    if (opt.structured) {
      res.msg.nu_in = message_ratio(res.post.q, res.msg.nu_out);
      res.msg = forward_backward_q(res.msg.nu_in, spatial, prior_q);
    }
  } else {
    res.post = initial_posteriors(model, RMat::Constant(M, U, 1.0 / static_cast<double>(U)),
                                  prior_c, hyper, opt);
  }
  PosteriorSet& p = res.post;

  for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    const CVec old_zr = p.z_R.mean, old_zb = p.z_B.mean, old_v = p.v.mean;
    const CategoricalQ old_q = p.q;
    const BernoulliC old_c = p.c;
    const double kappa = p.kappa.mean()(0);

    if (opt.joint) {
      update_joint(model, p.rho_R.mean(), p.rho_B.mean(), p.gamma.mean(), kappa, p);
    } else {
      auto [zr, zb] = update_z(model, p.v.mean, p.rho_R.mean(), p.rho_B.mean(), kappa,
                               p.z_B.mean, opt.cross_term);
      p.z_R = std::move(zr);
      p.z_B = std::move(zb);
      p.v = update_v(model, p.z_R.mean, p.z_B.mean, p.gamma.mean(), kappa);
      p.joint_cov = block_diagonal_cov(p);
    }

    if (opt.learn_precisions) {
      if (opt.structured) {
        if (model.has_ris()) p.rho_R = update_rho(p.q, p.z_R, hyper.ris);
        p.rho_B = update_rho(p.q, p.z_B, hyper.bs);
        p.gamma = update_gamma(p.c, p.v, hyper.nlos);
      } else {
        if (model.has_ris()) p.rho_R = update_precision_iid(p.z_R, hyper.iid);
        p.rho_B = update_precision_iid(p.z_B, hyper.iid);
        p.gamma = update_precision_iid(p.v, hyper.iid);
      }
    }
    if (opt.learn_noise) p.kappa = update_kappa(model, p, hyper.noise);

    if (opt.structured && opt.learn_precisions) {
      p.q = update_q(res.msg.nu_out, hyper, model.has_ris() ? &p.rho_R : nullptr, p.rho_B,
                     model.M, model.U);
      p.c = update_c(prior_c, hyper.nlos, p.gamma);
      res.msg = forward_backward_q(message_ratio(p.q, res.msg.nu_out), spatial, prior_q);
    }

    res.sweeps = sweep + 1;
    double change = std::max({relative_change(p.z_B.mean, old_zb), relative_change(p.v.mean, old_v)});
    if (model.has_ris()) change = std::max(change, relative_change(p.z_R.mean, old_zr));
    if (p.q.size() == old_q.size()) change = std::max(change, (p.q - old_q).cwiseAbs().maxCoeff());
    if (p.c.size() > 0 && p.c.size() == old_c.size()) {
      change = std::max(change, (p.c - old_c).cwiseAbs().maxCoeff());
    }
    if (sweep > 0 && change < opt.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double gaussian_free_energy(const LinearModel& model, const PosteriorSet& post,
                            const RVec& prec_R, const RVec& prec_B, const RVec& prec_v,
                            const std::optional<GammaParams>& noise_prior) {
  const double kg = static_cast<double>(model.y.size());
  double e_kappa, e_log_kappa;
  if (noise_prior) {
    e_kappa = post.kappa.mean()(0);
    e_log_kappa = post.kappa.log_mean()(0);
  } else {
    e_kappa = post.kappa.mean()(0);
    e_log_kappa = std::log(e_kappa);
  }
  double elbo = kg * (e_log_kappa - std::log(kPi)) - e_kappa * expected_residual(model, post);
  auto prior_term = [](const GaussianPosterior& x, const RVec& prec) {
    if (x.size() == 0) return 0.0;
    return (prec.array() / kPi).log().sum() - prec.dot(x.second_moment());
  };
  elbo += prior_term(post.z_R, prec_R) + prior_term(post.z_B, prec_B) + prior_term(post.v, prec_v);
  elbo += static_cast<double>(post.joint_cov.rows()) * std::log(kPi * std::exp(1.0)) +
          log_det_hpd(post.joint_cov);
  if (noise_prior) {
    const double a = post.kappa.shape(0), b = post.kappa.rate(0);
    const double a0 = noise_prior->shape, b0 = noise_prior->rate;
    elbo += gamma_log_norm(a0, b0) + (a0 - 1.0) * e_log_kappa - b0 * e_kappa;
    elbo -= gamma_log_norm(a, b) + (a - 1.0) * e_log_kappa - b * e_kappa;
  }
  return -elbo;
}

}  // namespace platoon
