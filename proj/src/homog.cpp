#include "mctopo/homog.hpp"

#include <cmath>
#include <exception>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mctopo/error.hpp"
#include "mctopo/quad4.hpp"

namespace mctopo::homog {

Eigen::Matrix3d BaseMaterial::plane_stress() const { return quad4::isotropic_plane_stress(E, nu); }

void BaseMaterial::validate() const {
  if (!(E > 0.0)) throw Error(ErrorKind::InvalidInput, "Young's modulus must be positive");
  if (!(nu > 0.0 && nu < 0.5)) throw Error(ErrorKind::InvalidInput, "Poisson ratio must lie in (0, 0.5)");
  if (!(void_ratio > 0.0 && void_ratio < 1e-3))
    throw Error(ErrorKind::InvalidInput, "void stiffness ratio must lie in (0, 1e-3)");
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Periodic node numbering; node 0 carries the rigid-body pin, so reduced dof = dof - 2.
struct PeriodicCell {
  int n;
  int node(int i, int j) const { return ((j % n + n) % n) * n + ((i % n + n) % n); }
  int reduced(int dof) const { return dof - 2; }
  int reduced_size() const { return 2 * n * n - 2; }

  std::array<int, 8> element_dofs(int ei, int ej) const {
    std::array<int, 8> dofs{};
    for (int a = 0; a < 4; ++a) {
      const int nd = node(ei + quad4::kNodeOffsets[a][0], ej + quad4::kNodeOffsets[a][1]);
      dofs[2 * a] = 2 * nd;
      dofs[2 * a + 1] = 2 * nd + 1;
    }
    return dofs;
  }
};

}  // namespace

HomogResult homogenize_full(const microlib::PixelGrid& grid, const BaseMaterial& mat) {
  mat.validate();
  const int n = grid.resolution();
  if (n < 2) throw Error(ErrorKind::InvalidInput, "grid resolution must be at least 2");
  if (grid.solid_count() == 0) throw Error(ErrorKind::DegenerateCell, "grid has no solid pixels");

  const PeriodicCell cell{n};
  const quad4::Matrix8d ke = quad4::stiffness(mat.plane_stress());
  const double e_void = mat.void_ratio;  // relative to ke, which already carries E

  std::array<quad4::Vector8d, 3> u0;
  u0[0] = quad4::uniform_strain_displacement(1.0, 0.0, 0.0);
  u0[1] = quad4::uniform_strain_displacement(0.0, 1.0, 0.0);
  u0[2] = quad4::uniform_strain_displacement(0.0, 0.0, 1.0);

  const int m = cell.reduced_size();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * n * 64);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 3);
  std::array<quad4::Vector8d, 3> fe;
  for (int a = 0; a < 3; ++a) fe[a] = ke * u0[a];

  for (int ej = 0; ej < n; ++ej) {
    for (int ei = 0; ei < n; ++ei) {
      const double scale = grid.solid(ei, ej) ? 1.0 : e_void;
      const auto dofs = cell.element_dofs(ei, ej);
      for (int r = 0; r < 8; ++r) {
        const int rr = cell.reduced(dofs[r]);
        if (rr < 0) continue;
        for (int a = 0; a < 3; ++a) rhs(rr, a) -= scale * fe[a][r];
        for (int c = 0; c < 8; ++c) {
          const int cc = cell.reduced(dofs[c]);
          if (cc < 0) continue;
          triplets.emplace_back(rr, cc, scale * ke(r, c));
        }
      }
    }
  }
  SpMat k(m, m);
  k.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> solver;
  solver.compute(k);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::DegenerateCell, "periodic cell stiffness is singular");
  const Eigen::MatrixXd chi = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !chi.allFinite())
    throw Error(ErrorKind::DegenerateCell, "periodic cell solve failed");

  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  std::array<quad4::Vector8d, 3> ue;
  for (int ej = 0; ej < n; ++ej) {
    for (int ei = 0; ei < n; ++ei) {
      const double scale = grid.solid(ei, ej) ? 1.0 : e_void;
      const auto dofs = cell.element_dofs(ei, ej);
      for (int a = 0; a < 3; ++a) {
        ue[a] = u0[a];
        for (int r = 0; r < 8; ++r) {
          const int rr = cell.reduced(dofs[r]);
          if (rr >= 0) ue[a][r] += chi(rr, a);
        }
      }
      for (int a = 0; a < 3; ++a) {
        const quad4::Vector8d kua = ke * ue[a];
        for (int b = a; b < 3; ++b) c(a, b) += scale * ue[b].dot(kua);
      }
    }
  }
  c /= static_cast<double>(n) * n;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < a; ++b) c(a, b) = c(b, a);

  HomogResult result{c, StiffnessVec{{c(0, 0), c(0, 1), c(1, 1), c(2, 2)}}};
  const double limit = kOrthotropyTolerance * c(0, 0);
  if (std::abs(result.C16()) >= limit || std::abs(result.C26()) >= limit)
    throw Error(ErrorKind::NonOrthotropicCell,
                "shear-normal coupling exceeds 1e-3 C11 (C16=" + std::to_string(result.C16()) +
                    ", C26=" + std::to_string(result.C26()) + ")");
  return result;
}

StiffnessVec homogenize(const microlib::PixelGrid& grid, const BaseMaterial& mat) {
  return homogenize_full(grid, mat).Y;
}

std::vector<DatasetRow> homogenize_library(std::span<const microlib::LibrarySample> library,
                                           const BaseMaterial& mat, Execution exec) {
  const auto count = static_cast<std::ptrdiff_t>(library.size());
  std::vector<DatasetRow> rows(library.size());
  std::vector<std::exception_ptr> errors(library.size());

  auto work = [&](std::ptrdiff_t s) {
    const auto& sample = library[static_cast<std::size_t>(s)];
    try {
      rows[s] = {sample.class_id, sample.achieved_vf, homogenize(sample.grid, mat)};
    } catch (const Error& e) {
      errors[s] = std::make_exception_ptr(
          Error(e.kind(), "sample " + std::to_string(s) + " (class " +
                              std::to_string(sample.class_id) + ", vf " +
                              std::to_string(sample.achieved_vf) + "): " + e.what()));
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };

  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t s = 0; s < count; ++s) work(s);
  } else {
    for (std::ptrdiff_t s = 0; s < count; ++s) work(s);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

}  // namespace mctopo::homog
