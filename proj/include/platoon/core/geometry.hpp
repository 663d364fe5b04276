#pragma once

#include <cstddef>
#include <vector>

#include "platoon/core/types.hpp"

namespace platoon {

// Half-wavelength ULA response; entry k is exp(-j*pi*k*cos(omega)).
CVec steering_ula(double omega, std::size_t K);

// UPA response as the Kronecker product a_Nx(phi) (x) a_Ny(theta); entry i*Ny + j.
CVec steering_upa(double phi, double theta, std::size_t nx, std::size_t ny);

// Local frame of a planar array. For a ULA only axis_h is used.
struct ArrayFrame {
  Direction3 axis_h;
  Direction3 axis_v;
  Direction3 normal;
};

struct UpaAngles {
  double phi = 0.0;
  double theta = 0.0;
};

// Angle between the direction anchor->p and the array axis, in [0, pi].
double ula_angle(const Position3& p, const Position3& anchor, const Direction3& axis);

// Direction angles of anchor->p against the horizontal and vertical array axes.
UpaAngles upa_angles(const Position3& p, const Position3& anchor, const ArrayFrame& frame);

// Inverse of upa_angles for points on the front side (positive normal component).
Position3 position_from_upa_angles(const Position3& anchor, const ArrayFrame& frame,
                                   const UpaAngles& angles, double range);

// Converts an axis-referenced angle to the broadside-referenced one used by the FIM analysis.
inline double broadside_angle(double axis_angle) { return kPi / 2.0 - axis_angle; }

// s_k = (2/n)(k - floor((n-1)/2)), k = 0..n-1.
std::vector<double> sine_grid(std::size_t n);

struct GridSpec {
  Position3 road_origin = Position3::Zero();
  Direction3 road_direction = Direction3::UnitX();
  std::size_t U = 0;
  double delta_L = 1.0;
  std::vector<Position3> grid_points;

  // Axis-referenced AoA grid: cos(bs_aoa_grid[k]) = sine_grid(K~)[k].
  std::vector<double> bs_aoa_grid;
  std::vector<double> bs_aoa_halfwidth;

  std::size_t ris_grid_h = 0;
  std::size_t ris_grid_v = 0;
  std::vector<double> ris_phi_grid;
  std::vector<double> ris_theta_grid;
  std::vector<double> ris_phi_halfwidth;
  std::vector<double> ris_theta_halfwidth;
  // Pairs ordered n = i * ris_grid_v + j.
  std::vector<UpaAngles> ris_angle_grid;

  std::size_t bs_grid_size() const { return bs_aoa_grid.size(); }
  std::size_t ris_grid_size() const { return ris_angle_grid.size(); }
  std::size_t ris_phi_index(std::size_t n) const { return n / ris_grid_v; }
  std::size_t ris_theta_index(std::size_t n) const { return n % ris_grid_v; }

  Position3 point(std::size_t u, double offset) const {
    return grid_points[u] + offset * road_direction;
  }
};

GridSpec make_grid(const Position3& origin, const Direction3& direction, std::size_t U,
                   double delta_L, std::size_t bs_grid, std::size_t ris_grid_h,
                   std::size_t ris_grid_v);

struct GridLocation {
  std::size_t index = 0;
  double offset = 0.0;
};

GridLocation nearest_grid(const Position3& p, const GridSpec& grid);

// Continuous off-grid parameters. Rows index VUEs.
struct OffsetEstimate {
  RMat delta_r;      // M x U, meters along the road
  RMat delta_omega;  // M x K~, radians
  RMat delta_phi;    // M x N~, radians
  RMat delta_theta;  // M x N~, radians

  static OffsetEstimate zeros(std::size_t M, const GridSpec& grid);
};

// Throws InvalidOffset if any entry exceeds the half-spacing of its grid.
void validate_offsets(const OffsetEstimate& offsets, const GridSpec& grid);

}  // namespace platoon
