#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mctopo/exec.hpp"
#include "mctopo/kernels.hpp"
#include "mctopo/quad4.hpp"
#include "mctopo/stiffness.hpp"

// Macro-scale plane-stress FE on a regular grid of unit square elements.
// Element (i, j) has id j * nx + i; node (i, j) has id j * (nx + 1) + i with dofs
// 2 * node (x) and 2 * node + 1 (y).
namespace mctopo::fea {

using quad4::Matrix8d;

struct MacroMesh {
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> active;  // per element; passive elements are left out of the model

  static MacroMesh rectangle(int nx, int ny);

  int n_elements() const { return nx * ny; }
  int n_nodes() const { return (nx + 1) * (ny + 1); }
  int n_dofs() const { return 2 * n_nodes(); }
  int node(int i, int j) const { return j * (nx + 1) + i; }
  int element(int i, int j) const { return j * nx + i; }
  bool is_active(int e) const { return active[static_cast<std::size_t>(e)] != 0; }
  std::vector<int> active_elements() const;
  int active_count() const;
  /// Global dofs of element e in local quad4 order.
  kernels::ElementDofs element_dofs(int e) const;
  /// Element centroid (i + 0.5, j + 0.5).
  Eigen::Vector2d centroid(int e) const;
  void validate() const;
};

struct LoadCase {
  Eigen::VectorXd F;  // full dof vector
  std::vector<int> fixed_dofs;
};

/// K_i for a unit value of the i-th component of [C11, C12, C22, C66].
const kernels::BasisSet& basis();

/// Sum_i Y_i K_i. Throws InvalidStiffness when Y is not positive definite.
Matrix8d element_stiffness(const StiffnessVec& Y);

/// Factorizes the reduced stiffness for one support set. Dofs fixed by the supports
/// or touching only passive elements are eliminated (zero displacement).
class FeSolver {
 public:
  FeSolver(const MacroMesh& mesh, std::vector<int> fixed_dofs);

  const MacroMesh& mesh() const { return mesh_; }
  const std::vector<int>& fixed_dofs() const { return fixed_; }
  int n_free() const { return n_free_; }
  /// Full-dof index -> reduced index, or -1.
  const std::vector<int>& reduced_index() const { return reduced_; }

  /// `ke` holds one matrix per active element, in active_elements() order.
  void factorize(std::span<const Matrix8d> ke, Execution exec = Execution::Parallel);
  /// Full-length displacement with zeros on eliminated dofs.
  Eigen::VectorXd solve(const Eigen::VectorXd& F) const;
  /// Relative residual |K u - f| / |f| of the reduced system for a full-length U.
  double residual(const Eigen::VectorXd& F, const Eigen::VectorXd& U) const;

 private:
  MacroMesh mesh_;
  std::vector<int> fixed_;
  std::vector<int> reduced_;
  int n_free_ = 0;
  std::vector<int> active_;
  std::vector<std::array<int, 8>> edofs_;  // reduced, -1 eliminated
  // slot of each (element, a, b) entry in K's value array
  std::vector<int> slots_;
  // inverse of slots_: contributors of each value slot, in element order
  std::vector<int> gather_ptr_, gather_;
  Eigen::SparseMatrix<double> K_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
  bool analyzed_ = false;
};

struct Analysis {
  std::vector<Eigen::VectorXd> U;   // per load case, full length
  std::vector<double> compliance;   // F^T U per load case
  double mean_compliance() const;
};

/// Reusable multi-load analysis; load cases sharing a support set share a factorization.
class Analyzer {
 public:
  Analyzer(const MacroMesh& mesh, std::vector<LoadCase> loads);

  const MacroMesh& mesh() const { return mesh_; }
  const std::vector<LoadCase>& loads() const { return loads_; }
  Analysis run(std::span<const Matrix8d> ke, Execution exec = Execution::Parallel);

 private:
  MacroMesh mesh_;
  std::vector<LoadCase> loads_;
  std::vector<std::unique_ptr<FeSolver>> solvers_;
  std::vector<int> solver_of_;
};

/// One-shot analysis.
Analysis solve(const MacroMesh& mesh, const std::vector<LoadCase>& loads, std::span<const Matrix8d> ke);

/// Sum over active elements of u_e^T k_e u_e.
double strain_energy_sum(const MacroMesh& mesh, std::span<const Matrix8d> ke, const Eigen::VectorXd& U);

quad4::Vector8d element_displacement(const MacroMesh& mesh, int e, const Eigen::VectorXd& U);

}  // namespace mctopo::fea
