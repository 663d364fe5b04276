#include "platoon/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "platoon/core/error.hpp"

namespace platoon {

CVec steering_ula(double omega, std::size_t K) {
  if (K == 0) fail(ErrorCode::InvalidDimension, "steering_ula: K must be at least 1");
  CVec a(static_cast<Eigen::Index>(K));
  const double c = std::cos(omega);
  for (std::size_t k = 0; k < K; ++k) {
    a(static_cast<Eigen::Index>(k)) = std::polar(1.0, -kPi * static_cast<double>(k) * c);
  }
  return a;
}

CVec steering_upa(double phi, double theta, std::size_t nx, std::size_t ny) {
  if (nx == 0 || ny == 0) fail(ErrorCode::InvalidDimension, "steering_upa: zero dimension");
  const CVec ax = steering_ula(phi, nx);
  const CVec ay = steering_ula(theta, ny);
  CVec a(static_cast<Eigen::Index>(nx * ny));
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      a(static_cast<Eigen::Index>(i * ny + j)) =
          ax(static_cast<Eigen::Index>(i)) * ay(static_cast<Eigen::Index>(j));
    }
  }
  return a;
}

namespace {

Direction3 unit_direction(const Position3& p, const Position3& anchor) {
  const Direction3 d = p - anchor;
  const double n = d.norm();
  if (!(n > 1e-12)) fail(ErrorCode::DegenerateGeometry, "point coincides with the array anchor");
  return d / n;
}

double clamped_acos(double x) { return std::acos(std::clamp(x, -1.0, 1.0)); }

}  // namespace

double ula_angle(const Position3& p, const Position3& anchor, const Direction3& axis) {
  return clamped_acos(unit_direction(p, anchor).dot(axis));
}

UpaAngles upa_angles(const Position3& p, const Position3& anchor, const ArrayFrame& frame) {
  const Direction3 u = unit_direction(p, anchor);
  return {clamped_acos(u.dot(frame.axis_h)), clamped_acos(u.dot(frame.axis_v))};
}

Position3 position_from_upa_angles(const Position3& anchor, const ArrayFrame& frame,
                                   const UpaAngles& angles, double range) {
  const double ch = std::cos(angles.phi);
  const double cv = std::cos(angles.theta);
  const double rest = 1.0 - ch * ch - cv * cv;
  if (rest < -1e-12) fail(ErrorCode::DegenerateGeometry, "angles do not describe a direction");
  const double cn = std::sqrt(std::max(rest, 0.0));
  return anchor + range * (ch * frame.axis_h + cv * frame.axis_v + cn * frame.normal);
}

std::vector<double> sine_grid(std::size_t n) {
  std::vector<double> s(n);
  const auto center = static_cast<double>((n - 1) / 2);
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = 2.0 / static_cast<double>(n) * (static_cast<double>(k) - center);
  }
  return s;
}

namespace {

void angle_grid(std::size_t n, std::vector<double>& angles, std::vector<double>& halfwidth) {
  angles.clear();
  halfwidth.clear();
  if (n == 0) return;
  for (double s : sine_grid(n)) angles.push_back(clamped_acos(s));
  halfwidth.assign(n, kPi / 2.0);
  for (std::size_t k = 0; k < n; ++k) {
    double w = kPi;
    if (k > 0) w = std::min(w, std::abs(angles[k] - angles[k - 1]));
    if (k + 1 < n) w = std::min(w, std::abs(angles[k + 1] - angles[k]));
    halfwidth[k] = 0.5 * w;
  }
}

}  // namespace

GridSpec make_grid(const Position3& origin, const Direction3& direction, std::size_t U,
                   double delta_L, std::size_t bs_grid, std::size_t ris_grid_h,
                   std::size_t ris_grid_v) {
  if (U == 0) fail(ErrorCode::InvalidDimension, "grid needs at least one point");
  if (!(delta_L > 0.0)) fail(ErrorCode::InvalidArgument, "grid length must be positive");
  if (!(direction.norm() > 0.0)) fail(ErrorCode::InvalidArgument, "road direction is zero");
  GridSpec g;
  g.road_origin = origin;
  g.road_direction = direction.normalized();
  g.U = U;
  g.delta_L = delta_L;
  g.grid_points.reserve(U);
  for (std::size_t u = 0; u < U; ++u) {
    g.grid_points.push_back(origin + static_cast<double>(u) * delta_L * g.road_direction);
  }
  angle_grid(bs_grid, g.bs_aoa_grid, g.bs_aoa_halfwidth);
  g.ris_grid_h = ris_grid_h;
  g.ris_grid_v = ris_grid_v;
  angle_grid(ris_grid_h, g.ris_phi_grid, g.ris_phi_halfwidth);
  angle_grid(ris_grid_v, g.ris_theta_grid, g.ris_theta_halfwidth);
  for (std::size_t i = 0; i < ris_grid_h; ++i) {
    for (std::size_t j = 0; j < ris_grid_v; ++j) {
      g.ris_angle_grid.push_back({g.ris_phi_grid[i], g.ris_theta_grid[j]});
    }
  }
  return g;
}

GridLocation nearest_grid(const Position3& p, const GridSpec& grid) {
  const double along = (p - grid.road_origin).dot(grid.road_direction) / grid.delta_L;
  const double last = static_cast<double>(grid.U - 1);
  if (!(along >= -0.5 && along <= last + 0.5)) {
    fail(ErrorCode::OutOfGrid, "position projects outside the road grid");
  }
  // ceil(t - 1/2) sends exact midpoints to the lower index.
  auto idx = static_cast<long long>(std::ceil(along - 0.5));
  idx = std::clamp<long long>(idx, 0, static_cast<long long>(grid.U - 1));
  const double offset = (along - static_cast<double>(idx)) * grid.delta_L;
  return {static_cast<std::size_t>(idx), offset};
}

OffsetEstimate OffsetEstimate::zeros(std::size_t M, const GridSpec& grid) {
  const auto m = static_cast<Eigen::Index>(M);
  OffsetEstimate o;
  o.delta_r = RMat::Zero(m, static_cast<Eigen::Index>(grid.U));
  o.delta_omega = RMat::Zero(m, static_cast<Eigen::Index>(grid.bs_grid_size()));
  o.delta_phi = RMat::Zero(m, static_cast<Eigen::Index>(grid.ris_grid_size()));
  o.delta_theta = RMat::Zero(m, static_cast<Eigen::Index>(grid.ris_grid_size()));
  return o;
}

void validate_offsets(const OffsetEstimate& o, const GridSpec& grid) {
  const double tol = 1e-12;
  if (o.delta_r.cols() != static_cast<Eigen::Index>(grid.U) ||
      o.delta_omega.cols() != static_cast<Eigen::Index>(grid.bs_grid_size()) ||
      o.delta_phi.cols() != static_cast<Eigen::Index>(grid.ris_grid_size()) ||
      o.delta_theta.cols() != static_cast<Eigen::Index>(grid.ris_grid_size())) {
    fail(ErrorCode::InvalidDimension, "offset estimate does not match the grid");
  }
  if (!o.delta_r.allFinite() || !o.delta_omega.allFinite() || !o.delta_phi.allFinite() ||
      !o.delta_theta.allFinite()) {
    fail(ErrorCode::InvalidOffset, "offset estimate has non-finite entries");
  }
  if (o.delta_r.size() > 0 && o.delta_r.cwiseAbs().maxCoeff() > grid.delta_L / 2.0 + tol) {
    fail(ErrorCode::InvalidOffset, "road offset exceeds half the grid length");
  }
  for (Eigen::Index m = 0; m < o.delta_omega.rows(); ++m) {
    for (Eigen::Index k = 0; k < o.delta_omega.cols(); ++k) {
      if (std::abs(o.delta_omega(m, k)) > grid.bs_aoa_halfwidth[static_cast<std::size_t>(k)] + tol) {
        fail(ErrorCode::InvalidOffset, "AoA offset exceeds half the grid spacing");
      }
    }
    for (Eigen::Index n = 0; n < o.delta_phi.cols(); ++n) {
      const auto nn = static_cast<std::size_t>(n);
      if (std::abs(o.delta_phi(m, n)) > grid.ris_phi_halfwidth[grid.ris_phi_index(nn)] + tol ||
          std::abs(o.delta_theta(m, n)) >
              grid.ris_theta_halfwidth[grid.ris_theta_index(nn)] + tol) {
        fail(ErrorCode::InvalidOffset, "RIS angle offset exceeds half the grid spacing");
      }
    }
  }
}

}  // namespace platoon
