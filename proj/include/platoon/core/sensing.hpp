#pragma once

#include <cstddef>
#include <vector>

#include "platoon/core/channel.hpp"
#include "platoon/core/geometry.hpp"
#include "platoon/core/types.hpp"

namespace platoon {

enum class Branch { Ris, Bs };

// Column layout of the CS model y = F z + Xi v + n.
//   F  = [RIS LoS block (M*U) | BS LoS block (M*U)], column m*U + u inside a block
//   Xi = [RIS NLoS block (M*N~) | BS NLoS block (M*K~)]
// The RIS blocks are empty when the deployment has no RIS.
struct SensingLayout {
  std::size_t M = 0;
  std::size_t U = 0;
  std::size_t bs_grid = 0;
  std::size_t ris_grid = 0;
  bool has_ris = true;

  std::size_t los_block() const { return M * U; }
  std::size_t los_cols() const { return (has_ris ? 2 : 1) * los_block(); }
  std::size_t nlos_ris_block() const { return has_ris ? M * ris_grid : 0; }
  std::size_t nlos_bs_block() const { return M * bs_grid; }
  std::size_t nlos_cols() const { return nlos_ris_block() + nlos_bs_block(); }

  std::size_t los_col(Branch b, std::size_t m, std::size_t u) const {
    return (b == Branch::Ris ? 0 : (has_ris ? los_block() : 0)) + m * U + u;
  }
  std::size_t nlos_ris_col(std::size_t m, std::size_t n) const { return m * ris_grid + n; }
  std::size_t nlos_bs_col(std::size_t m, std::size_t k) const {
    return nlos_ris_block() + m * bs_grid + k;
  }
};

struct SensingMatrices {
  SensingLayout layout;
  CMat F;
  CMat Xi;
};

// Builds individual dictionary columns (stacked over pilots) and whole matrices.
class SensingBuilder {
 public:
  SensingBuilder(const GridSpec& grid, const Deployment& dep, const CMat& pilots,
                 const RisProfile& ris, const CMat& H_rb);

  const SensingLayout& layout() const { return layout_; }
  const GridSpec& grid() const { return grid_; }
  std::size_t rows() const { return K_ * G_; }

  CVec los_column(Branch b, std::size_t m, std::size_t u, double dr) const;
  CVec nlos_bs_column(std::size_t m, std::size_t k, double domega) const;
  CVec nlos_ris_column(std::size_t m, std::size_t n, double dphi, double dtheta) const;

  SensingMatrices build(const OffsetEstimate& offsets) const;

 private:
  CVec stack_bs(std::size_t m, const CVec& a_k) const;
  CVec stack_ris(std::size_t m, const CVec& a_n) const;

  GridSpec grid_;
  Deployment dep_;
  CMat pilots_;
  std::vector<CMat> cascade_;  // H_rb * diag(theta_g), one per pilot
  SensingLayout layout_;
  std::size_t K_ = 0;
  std::size_t G_ = 0;
};

SensingMatrices build_sensing_matrices(const GridSpec& grid, const Deployment& dep,
                                       const OffsetEstimate& offsets, const RisProfile& ris,
                                       const CMat& pilots, const CMat& H_rb);

struct SparseTruth {
  CVec z;
  CVec v;
  OffsetEstimate offsets;
};

// Ground-truth sparse vectors and off-grid parameters of slot t.
SparseTruth ground_truth_sparse(const PlatoonTrajectory& traj, std::size_t t,
                                const ChannelRealization& ch, const GridSpec& grid,
                                bool has_ris);

}  // namespace platoon
