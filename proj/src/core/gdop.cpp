#include "platoon/core/gdop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "platoon/core/error.hpp"
#include "platoon/core/geometry.hpp"

namespace platoon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum_of_squares(std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += static_cast<double>(k) * static_cast<double>(k);
  return s;
}

// (c / 4 pi)^-zeta * f_c^zeta, the inverse of the free-space reference amplitude.
double inverse_reference(double f_c, double zeta) {
  return std::pow(kSpeedOfLight / (4.0 * kPi), -zeta) * std::pow(f_c, zeta);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) fail(ErrorCode::InvalidArgument, std::string(what) + " must be positive");
}

bool blind(double cosine) { return std::abs(cosine) < 1e-12; }

std::string format_value(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double fim_aoa_ula(double omega, double gain_mag, double sigma2, std::size_t K) {
  require_positive(sigma2, "sigma2");
  if (K == 0) fail(ErrorCode::InvalidArgument, "K must be at least 1");
  const double c = kPi * std::cos(omega);
  return 2.0 / sigma2 * c * c * gain_mag * gain_mag * sum_of_squares(K);
}

double crlb_ula(double omega, double gain_mag, double sigma2, std::size_t K) {
  require_positive(sigma2, "sigma2");
  if (K == 0) fail(ErrorCode::InvalidArgument, "K must be at least 1");
  if (blind(std::cos(omega))) return kInf;
  const double c = kPi * std::cos(omega);
  const double k3 = std::pow(static_cast<double>(K), 3);
  const double denom = 2.0 * k3 * c * c * gain_mag * gain_mag;
  if (!(denom > 0.0)) return kInf;
  return 3.0 * sigma2 / denom;
}

double gdop_ula(double omega, double d, double sigma, std::size_t K, double f_c, double zeta) {
  require_positive(d, "distance");
  require_positive(sigma, "sigma");
  require_positive(f_c, "carrier frequency");
  if (K == 0) fail(ErrorCode::InvalidArgument, "K must be at least 1");
  const double c = std::cos(omega);
  if (blind(c)) return kInf;
  return std::sqrt(1.5) / kPi * inverse_reference(f_c, zeta) * sigma *
         std::pow(static_cast<double>(K), -1.5) * std::pow(d, 1.0 + zeta) / std::abs(c);
}

double gdop_upa(double phi, double theta, double d, double sigma, std::size_t N_h,
                std::size_t N_v, double f_c, double zeta) {
  require_positive(d, "distance");
  require_positive(sigma, "sigma");
  require_positive(f_c, "carrier frequency");
  if (N_h == 0 || N_v == 0) fail(ErrorCode::InvalidArgument, "array dimensions must be positive");
  const double c = std::cos(phi) * std::cos(theta);
  if (blind(std::cos(phi)) || blind(std::cos(theta))) return kInf;
  return std::sqrt(1.5) / kPi * inverse_reference(f_c, zeta) * sigma *
         std::pow(static_cast<double>(N_h), -1.5) * std::pow(static_cast<double>(N_v), -0.5) *
         std::pow(d, 1.0 + zeta) / std::abs(c);
}

double gdop_ris(double phi, double theta, double d_mr, double sigma, std::size_t N_h,
                std::size_t N_v, std::size_t K, double f_c, double zeta_mr, double pl_rb_mag) {
  require_positive(pl_rb_mag, "BS-RIS gain magnitude");
  if (K == 0) fail(ErrorCode::InvalidArgument, "K must be at least 1");
  const double g = gdop_upa(phi, theta, d_mr, sigma, N_h, N_v, f_c, zeta_mr);
  return g / (pl_rb_mag * std::sqrt(static_cast<double>(K)));
}

double gdop_combined(double gdop_a, double gdop_b) {
  if (gdop_a < 0.0 || gdop_b < 0.0) fail(ErrorCode::InvalidArgument, "GDOP values must be nonnegative");
  if (std::isinf(gdop_a)) return gdop_b;
  if (std::isinf(gdop_b)) return gdop_a;
  if (gdop_a == 0.0 || gdop_b == 0.0) return 0.0;
  return std::min({1.0 / (1.0 / gdop_a + 1.0 / gdop_b), gdop_a, gdop_b});
}

GdopRatio gdop_ratio(const UlaGdopParams& bs, const RisGdopParams& ris) {
  GdopRatio r;
  r.full = gdop_ula(bs.omega, bs.d, bs.sigma, bs.K, bs.f_c, bs.zeta) /
           gdop_ris(ris.phi, ris.theta, ris.d, ris.sigma, ris.N_h, ris.N_v, ris.K, ris.f_c,
                    ris.zeta, ris.pl_rb_mag);
  r.trimmed = ris.pl_rb_mag / static_cast<double>(ris.K) *
              std::pow(static_cast<double>(ris.N_h), 1.5) *
              std::pow(static_cast<double>(ris.N_v), 0.5);
  return r;
}

CVec steering_ula_broadside(double omega, std::size_t K) {
  CVec a(static_cast<Eigen::Index>(K));
  const double s = std::sin(omega);
  for (std::size_t k = 0; k < K; ++k) {
    a(static_cast<Eigen::Index>(k)) = std::polar(1.0, -kPi * static_cast<double>(k) * s);
  }
  return a;
}

CVec steering_upa_broadside(double phi, double theta, std::size_t N_h, std::size_t N_v) {
  CVec a(static_cast<Eigen::Index>(N_h * N_v));
  const double sp = std::sin(phi);
  const double st = std::sin(theta);
  for (std::size_t i = 0; i < N_h; ++i) {
    for (std::size_t j = 0; j < N_v; ++j) {
      const double ph = -kPi * (static_cast<double>(i) * sp + static_cast<double>(j) * st);
      a(static_cast<Eigen::Index>(i * N_v + j)) = std::polar(1.0, ph);
    }
  }
  return a;
}

double fim_ris_cascaded(double phi, double gain_mag, double sigma2, std::size_t N_h,
                        std::size_t N_v, std::size_t K, double pl_rb_mag) {
  require_positive(sigma2, "sigma2");
  const double c = kPi * std::cos(phi);
  const double grad_sq = gain_mag * gain_mag * c * c * static_cast<double>(N_v) * sum_of_squares(N_h);
  return 2.0 / sigma2 * pl_rb_mag * pl_rb_mag * static_cast<double>(K) * grad_sq;
}

RMat fim_numeric_oracle(const std::function<CVec(const RVec&)>& mean_map, const RVec& params,
                        double sigma2, double step) {
  require_positive(sigma2, "sigma2");
  if (!(step > 0.0) || !std::isfinite(step) || step < 1e-14) {
    fail(ErrorCode::Numerical, "finite-difference step underflow");
  }
  const CVec mu0 = mean_map(params);
  CMat J(mu0.size(), params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    RVec xp = params, xm = params;
    xp(i) += step;
    xm(i) -= step;
    J.col(i) = (mean_map(xp) - mean_map(xm)) / (2.0 * step);
  }
  if (!J.allFinite()) fail(ErrorCode::Numerical, "Jacobian is not finite");
  return 2.0 / sigma2 * (J.adjoint() * J).real();
}

std::string deployment_name(GdopDeployment d) {
  switch (d) {
    case GdopDeployment::Bs: return "BS";
    case GdopDeployment::Ris: return "RIS";
    case GdopDeployment::BsRis: return "BS+RIS";
    case GdopDeployment::BsBs: return "BS+BS";
  }
  return "unknown";
}

GdopDeployment deployment_from_name(const std::string& name) {
  for (GdopDeployment d : {GdopDeployment::Bs, GdopDeployment::Ris, GdopDeployment::BsRis,
                           GdopDeployment::BsBs}) {
    if (deployment_name(d) == name) return d;
  }
  fail(ErrorCode::InvalidArgument, "unknown deployment '" + name + "'");
}

GdopReport gdop_map(const ScenarioConfig& cfg, const GdopRaster& raster,
                    const std::vector<GdopDeployment>& deployments, double pl_rb_mag) {
  if (!(raster.step > 0.0) || raster.x_max < raster.x_min || raster.y_max < raster.y_min) {
    fail(ErrorCode::InvalidArgument, "raster must have a positive step and ordered bounds");
  }
  if (deployments.empty()) fail(ErrorCode::InvalidArgument, "no deployment requested");
  const Deployment dep = make_deployment(cfg);
  const double sigma = std::sqrt(cfg.noise_power_w());
  GdopReport rep;
  rep.deployments = deployments;
  const auto nx = static_cast<std::size_t>(std::floor((raster.x_max - raster.x_min) / raster.step + 1e-9)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor((raster.y_max - raster.y_min) / raster.step + 1e-9)) + 1;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      rep.points.emplace_back(raster.x_min + static_cast<double>(i) * raster.step,
                              raster.y_min + static_cast<double>(j) * raster.step, raster.z);
    }
  }
  if (rep.points.empty()) fail(ErrorCode::InvalidArgument, "empty raster");

  auto bs_gdop = [&](const Position3& p, const Position3& anchor) {
    const double d = (p - anchor).norm();
    if (d == 0.0) return 0.0;
    const double omega = broadside_angle(ula_angle(p, anchor, dep.bs_axis));
    return gdop_ula(omega, d, sigma, cfg.K, cfg.carrier_hz, cfg.zeta_bs);
  };
  auto ris_gdop = [&](const Position3& p) {
    const double d = (p - dep.ris_position).norm();
    if (d == 0.0) return 0.0;
    const UpaAngles a = upa_angles(p, dep.ris_position, dep.ris_frame);
    return gdop_ris(broadside_angle(a.phi), broadside_angle(a.theta), d, sigma, cfg.N_h, cfg.N_v,
                    cfg.K, cfg.carrier_hz, cfg.zeta_ris, pl_rb_mag);
  };

  rep.values.resize(static_cast<Eigen::Index>(rep.points.size()),
                    static_cast<Eigen::Index>(deployments.size()));
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    const Position3& p = rep.points[i];
    for (std::size_t k = 0; k < deployments.size(); ++k) {
      double g = 0.0;
      switch (deployments[k]) {
        case GdopDeployment::Bs: g = bs_gdop(p, dep.bs_position); break;
        case GdopDeployment::Ris: g = ris_gdop(p); break;
        case GdopDeployment::BsRis: g = gdop_combined(bs_gdop(p, dep.bs_position), ris_gdop(p)); break;
        case GdopDeployment::BsBs:
          g = gdop_combined(bs_gdop(p, dep.bs_position), bs_gdop(p, dep.ris_position));
          break;
      }
      rep.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g;
    }
  }
  return rep;
}

void write_gdop_csv(const GdopReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
  out << "x,y,deployment,gdop\n";
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    for (std::size_t k = 0; k < report.deployments.size(); ++k) {
      out << format_value(report.points[i].x()) << ',' << format_value(report.points[i].y()) << ','
          << deployment_name(report.deployments[k]) << ','
          << format_value(report.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)))
          << '\n';
    }
  }
  if (!out) fail(ErrorCode::Io, "failed writing " + path);
}

}  // namespace platoon
