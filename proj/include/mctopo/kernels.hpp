#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mctopo/quad4.hpp"

namespace mctopo::gp {
class MrLvgpModel;
}

// Data-parallel inner loops. Each OpenMP kernel has a plain serial twin in
// `kernels::serial` that tests compare against and the benchmark times.
namespace mctopo::kernels {

/// R_ij = exp(-sum_k phi_k (X_ik - X_jk)^2 - |Z_i - Z_j|^2) + nugget * delta_ij.
/// `Z` holds the latent point of each training row (n x 2).
void correlation_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& phi, double nugget, Eigen::MatrixXd& R);

/// Per-point predictions and raw-unit gradients for a batch of (rho, z1, z2).
struct PredictBatch {
  Eigen::MatrixXd Y;       // k x m
  Eigen::MatrixXd dY_drho;  // k x m
  Eigen::MatrixXd dY_dz1;   // k x m
  Eigen::MatrixXd dY_dz2;   // k x m
  void resize(Eigen::Index k, Eigen::Index m);
};

void predict_batch(const gp::MrLvgpModel& model, std::span<const double> rho,
                   std::span<const double> z1, std::span<const double> z2, PredictBatch& out);

using ElementDofs = std::array<int, 8>;  // -1 for eliminated dofs
using BasisSet = std::array<quad4::Matrix8d, 4>;

/// q(e, i) = u_e^T K_i u_e for the four stiffness basis matrices.
void element_energies(std::span<const ElementDofs> dofs, const Eigen::VectorXd& U,
                      const BasisSet& basis, Eigen::MatrixXd& q);

/// Compressed sparse rows.
struct CsrMatrix {
  int rows = 0, cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  CsrMatrix transpose() const;
};

void csr_multiply(const CsrMatrix& a, std::span<const double> x, std::span<double> y);

namespace serial {
void correlation_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& phi, double nugget, Eigen::MatrixXd& R);
void predict_batch(const gp::MrLvgpModel& model, std::span<const double> rho,
                   std::span<const double> z1, std::span<const double> z2, PredictBatch& out);
void element_energies(std::span<const ElementDofs> dofs, const Eigen::VectorXd& U,
                      const BasisSet& basis, Eigen::MatrixXd& q);
void csr_multiply(const CsrMatrix& a, std::span<const double> x, std::span<double> y);
}  // namespace serial

}  // namespace mctopo::kernels
