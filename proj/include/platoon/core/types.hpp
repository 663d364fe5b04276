#pragma once

#include <complex>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace platoon {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using BMat = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Position3 = Eigen::Vector3d;
using Direction3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;

}  // namespace platoon
