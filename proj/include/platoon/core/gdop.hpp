#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "platoon/core/channel.hpp"
#include "platoon/core/config.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

// All angles in this module are measured from the array broadside, so the
// response of a ULA is exp(-j*pi*k*sin(omega)) and cos(omega) = 0 is the endfire blind spot.

// (2 / sigma2) (pi cos omega)^2 |gain|^2 sum_{k=0}^{K-1} k^2.
double fim_aoa_ula(double omega, double gain_mag, double sigma2, std::size_t K);

// 3 sigma2 / (2 K^3 (pi cos omega)^2 |gain|^2); +inf when the information vanishes.
double crlb_ula(double omega, double gain_mag, double sigma2, std::size_t K);

// sqrt(1.5) / pi * (c / 4 pi)^-zeta * sigma * K^-1.5 * f_c^zeta * d^(1 + zeta) / cos(omega).
double gdop_ula(double omega, double d, double sigma, std::size_t K, double f_c, double zeta);

// UPA form with N_h^-1.5 N_v^-0.5 and 1 / (cos(phi) cos(theta)).
double gdop_upa(double phi, double theta, double d, double sigma, std::size_t N_h,
                std::size_t N_v, double f_c, double zeta);

// Cascaded RIS: gdop_upa scaled by 1 / (|PL_rb| sqrt(K)).
double gdop_ris(double phi, double theta, double d_mr, double sigma, std::size_t N_h,
                std::size_t N_v, std::size_t K, double f_c, double zeta_mr, double pl_rb_mag);

// Harmonic combination (1/a + 1/b)^-1.
double gdop_combined(double gdop_a, double gdop_b);

struct UlaGdopParams {
  double omega = 0.0;
  double d = 1.0;
  double sigma = 1.0;
  std::size_t K = 1;
  double f_c = 1.0;
  double zeta = 2.0;
};

struct RisGdopParams {
  double phi = 0.0;
  double theta = 0.0;
  double d = 1.0;
  double sigma = 1.0;
  std::size_t N_h = 1;
  std::size_t N_v = 1;
  std::size_t K = 1;
  double f_c = 1.0;
  double zeta = 2.0;
  double pl_rb_mag = 1.0;
};

struct GdopRatio {
  double full = 0.0;     // gdop_ula / gdop_ris
  double trimmed = 0.0;  // |PL_rb| K^-1 N_h^1.5 N_v^0.5
};

GdopRatio gdop_ratio(const UlaGdopParams& bs, const RisGdopParams& ris);

// UPA response exp(-j*pi*(i sin(phi) + j sin(theta))), entry i * N_v + j.
CVec steering_upa_broadside(double phi, double theta, std::size_t N_h, std::size_t N_v);
CVec steering_ula_broadside(double omega, std::size_t K);

// Closed-form azimuth FIM of the cascaded link with H_rb^H H_rb replaced by |PL_rb|^2 K I,
// for a single RIS configuration.
double fim_ris_cascaded(double phi, double gain_mag, double sigma2, std::size_t N_h,
                        std::size_t N_v, std::size_t K, double pl_rb_mag);

// (2 / sigma2) Re(J^H J) with J the central-difference Jacobian of mean_map at params.
RMat fim_numeric_oracle(const std::function<CVec(const RVec&)>& mean_map, const RVec& params,
                        double sigma2, double step = 1e-6);

enum class GdopDeployment { Bs, Ris, BsRis, BsBs };

std::string deployment_name(GdopDeployment d);
GdopDeployment deployment_from_name(const std::string& name);

struct GdopRaster {
  double x_min = 0.0;
  double x_max = 200.0;
  double y_min = 0.0;
  double y_max = 120.0;
  double step = 5.0;
  double z = 0.0;
};

struct GdopReport {
  std::vector<Position3> points;
  std::vector<GdopDeployment> deployments;
  RMat values;  // points x deployments
};

// Per-point GDOP from the closed forms with geometry-derived angles and ranges.
// The second BS of BsBs sits at the RIS position with the BS array orientation.
GdopReport gdop_map(const ScenarioConfig& cfg, const GdopRaster& raster,
                    const std::vector<GdopDeployment>& deployments, double pl_rb_mag);

// Header x,y,deployment,gdop; infinite values are written as inf.
void write_gdop_csv(const GdopReport& report, const std::string& path);

}  // namespace platoon
