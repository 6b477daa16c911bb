#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mctopo/exec.hpp"
#include "mctopo/microlib.hpp"
#include "mctopo/stiffness.hpp"

namespace mctopo::homog {

struct BaseMaterial {
  double E = 1.0;
  double nu = 0.3;
  /// Void pixels get E * void_ratio.
  double void_ratio = 1e-9;

  double E_void() const { return E * void_ratio; }
  Eigen::Matrix3d plane_stress() const;
  void validate() const;
};

/// Off-orthotropic couplings above this fraction of C11 reject the cell.
inline constexpr double kOrthotropyTolerance = 1e-3;

struct HomogResult {
  Eigen::Matrix3d C;  // full effective matrix, Voigt order (11, 22, 12)
  StiffnessVec Y;
  double C16() const { return C(0, 2); }
  double C26() const { return C(1, 2); }
};

/// Periodic homogenization: one bilinear quad per pixel, three unit macro strains,
/// effective stiffness from the mutual strain energies.
HomogResult homogenize_full(const microlib::PixelGrid& grid, const BaseMaterial& mat);
StiffnessVec homogenize(const microlib::PixelGrid& grid, const BaseMaterial& mat);

struct DatasetRow {
  int class_id;
  double vf;
  StiffnessVec Y;
};

/// One row per sample in library order; the quantitative input is the achieved vf.
std::vector<DatasetRow> homogenize_library(std::span<const microlib::LibrarySample> library,
                                           const BaseMaterial& mat,
                                           Execution exec = Execution::Parallel);

}  // namespace mctopo::homog
