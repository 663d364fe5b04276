#include "platoon/core/sensing.hpp"

#include "platoon/core/error.hpp"

namespace platoon {

SensingBuilder::SensingBuilder(const GridSpec& grid, const Deployment& dep, const CMat& pilots,
                               const RisProfile& ris, const CMat& H_rb)
    : grid_(grid), dep_(dep), pilots_(pilots) {
  K_ = dep.K;
  G_ = static_cast<std::size_t>(pilots.cols());
  layout_.M = static_cast<std::size_t>(pilots.rows());
  layout_.U = grid.U;
  layout_.bs_grid = grid.bs_grid_size();
  layout_.ris_grid = grid.ris_grid_size();
  layout_.has_ris = dep.use_ris;
  if (dep.use_ris) {
    if (H_rb.rows() != static_cast<Eigen::Index>(K_) ||
        H_rb.cols() != static_cast<Eigen::Index>(dep.N())) {
      fail(ErrorCode::InvalidDimension, "H_rb must be K x N");
    }
    if (ris.theta.size() != 1 && ris.theta.size() != G_) {
      fail(ErrorCode::InvalidDimension, "RIS profile count must be 1 or G");
    }
    for (std::size_t g = 0; g < G_; ++g) {
      cascade_.push_back(H_rb * ris.at(g).asDiagonal());
    }
  }
}

CVec SensingBuilder::stack_bs(std::size_t m, const CVec& a_k) const {
  const auto K = static_cast<Eigen::Index>(K_);
  CVec col(K * static_cast<Eigen::Index>(G_));
  for (std::size_t g = 0; g < G_; ++g) {
    col.segment(static_cast<Eigen::Index>(g) * K, K) =
        pilots_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(g)) * a_k;
  }
  return col;
}

CVec SensingBuilder::stack_ris(std::size_t m, const CVec& a_n) const {
  const auto K = static_cast<Eigen::Index>(K_);
  CVec col(K * static_cast<Eigen::Index>(G_));
  for (std::size_t g = 0; g < G_; ++g) {
    col.segment(static_cast<Eigen::Index>(g) * K, K) =
        pilots_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(g)) * (cascade_[g] * a_n);
  }
  return col;
}

CVec SensingBuilder::los_column(Branch b, std::size_t m, std::size_t u, double dr) const {
  const Position3 p = grid_.point(u, dr);
  if (b == Branch::Bs) {
    return stack_bs(m, steering_ula(ula_angle(p, dep_.bs_position, dep_.bs_axis), dep_.K));
  }
  if (!layout_.has_ris) fail(ErrorCode::InvalidArgument, "deployment has no RIS");
  const UpaAngles ang = upa_angles(p, dep_.ris_position, dep_.ris_frame);
  return stack_ris(m, steering_upa(ang.phi, ang.theta, dep_.N_h, dep_.N_v));
}

CVec SensingBuilder::nlos_bs_column(std::size_t m, std::size_t k, double domega) const {
  return stack_bs(m, steering_ula(grid_.bs_aoa_grid[k] + domega, dep_.K));
}

CVec SensingBuilder::nlos_ris_column(std::size_t m, std::size_t n, double dphi,
                                     double dtheta) const {
  if (!layout_.has_ris) fail(ErrorCode::InvalidArgument, "deployment has no RIS");
  const UpaAngles& g = grid_.ris_angle_grid[n];
  return stack_ris(m, steering_upa(g.phi + dphi, g.theta + dtheta, dep_.N_h, dep_.N_v));
}

SensingMatrices SensingBuilder::build(const OffsetEstimate& o) const {
  validate_offsets(o, grid_);
  if (o.delta_r.rows() != static_cast<Eigen::Index>(layout_.M)) {
    fail(ErrorCode::InvalidDimension, "offset rows must equal the number of VUEs");
  }
  SensingMatrices s;
  s.layout = layout_;
  const auto rows = static_cast<Eigen::Index>(this->rows());
  s.F.resize(rows, static_cast<Eigen::Index>(layout_.los_cols()));
  s.Xi.resize(rows, static_cast<Eigen::Index>(layout_.nlos_cols()));
  for (std::size_t m = 0; m < layout_.M; ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    for (std::size_t u = 0; u < layout_.U; ++u) {
      const double dr = o.delta_r(mi, static_cast<Eigen::Index>(u));
      if (layout_.has_ris) {
        s.F.col(static_cast<Eigen::Index>(layout_.los_col(Branch::Ris, m, u))) =
            los_column(Branch::Ris, m, u, dr);
      }
      s.F.col(static_cast<Eigen::Index>(layout_.los_col(Branch::Bs, m, u))) =
          los_column(Branch::Bs, m, u, dr);
    }
    if (layout_.has_ris) {
      for (std::size_t n = 0; n < layout_.ris_grid; ++n) {
        const auto ni = static_cast<Eigen::Index>(n);
        s.Xi.col(static_cast<Eigen::Index>(layout_.nlos_ris_col(m, n))) =
            nlos_ris_column(m, n, o.delta_phi(mi, ni), o.delta_theta(mi, ni));
      }
    }
    for (std::size_t k = 0; k < layout_.bs_grid; ++k) {
      s.Xi.col(static_cast<Eigen::Index>(layout_.nlos_bs_col(m, k))) =
          nlos_bs_column(m, k, o.delta_omega(mi, static_cast<Eigen::Index>(k)));
    }
  }
  return s;
}

SensingMatrices build_sensing_matrices(const GridSpec& grid, const Deployment& dep,
                                       const OffsetEstimate& offsets, const RisProfile& ris,
                                       const CMat& pilots, const CMat& H_rb) {
  return SensingBuilder(grid, dep, pilots, ris, H_rb).build(offsets);
}

SparseTruth ground_truth_sparse(const PlatoonTrajectory& traj, std::size_t t,
                                const ChannelRealization& ch, const GridSpec& grid,
                                bool has_ris) {
  SensingLayout L;
  L.M = traj.M;
  L.U = grid.U;
  L.bs_grid = grid.bs_grid_size();
  L.ris_grid = grid.ris_grid_size();
  L.has_ris = has_ris;
  SparseTruth s;
  s.z = CVec::Zero(static_cast<Eigen::Index>(L.los_cols()));
  s.v = CVec::Zero(static_cast<Eigen::Index>(L.nlos_cols()));
  s.offsets = OffsetEstimate::zeros(traj.M, grid);
  for (std::size_t m = 0; m < traj.M; ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    const GridLocation& loc = traj.location[t][m];
    s.offsets.delta_r(mi, static_cast<Eigen::Index>(loc.index)) = loc.offset;
    if (has_ris) s.z(static_cast<Eigen::Index>(L.los_col(Branch::Ris, m, loc.index))) = ch.eta(mi);
    s.z(static_cast<Eigen::Index>(L.los_col(Branch::Bs, m, loc.index))) = ch.beta(mi);
    for (std::size_t k = 0; k < L.bs_grid; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      if (!ch.support_bs(mi, ki)) continue;
      s.v(static_cast<Eigen::Index>(L.nlos_bs_col(m, k))) = ch.nlos_gain_bs(mi, ki);
      s.offsets.delta_omega(mi, ki) = ch.nlos_offset_bs(mi, ki);
    }
    for (std::size_t n = 0; n < L.ris_grid; ++n) {
      const auto ni = static_cast<Eigen::Index>(n);
      if (!ch.support_ris(mi, ni)) continue;
      s.offsets.delta_phi(mi, ni) = ch.nlos_offset_phi(mi, ni);
      s.offsets.delta_theta(mi, ni) = ch.nlos_offset_theta(mi, ni);
      if (has_ris) s.v(static_cast<Eigen::Index>(L.nlos_ris_col(m, n))) = ch.nlos_gain_ris(mi, ni);
    }
  }
  return s;
}

}  // namespace platoon
