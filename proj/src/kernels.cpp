#include "mctopo/kernels.hpp"

#include <cmath>

#include "mctopo/gp.hpp"

namespace mctopo::kernels {

namespace {

double pair_correlation(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& phi, Eigen::Index i, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < X.cols(); ++k) {
    const double d = X(i, k) - X(j, k);
    s += phi[k] * d * d;
  }
  const double d1 = Z(i, 0) - Z(j, 0), d2 = Z(i, 1) - Z(j, 1);
  return std::exp(-(s + d1 * d1 + d2 * d2));
}

void predict_one(const gp::MrLvgpModel& model, double rho, double z1, double z2,
                 PredictBatch& out, Eigen::Index row) {
  Eigen::VectorXd x(1);
  x[0] = rho;
  const gp::Prediction p = model.predict_grad(x, gp::Vector2d(z1, z2));
  out.Y.row(row) = p.y.transpose();
  out.dY_drho.row(row) = p.d_dx.col(0).transpose();
  out.dY_dz1.row(row) = p.d_dz.col(0).transpose();
  out.dY_dz2.row(row) = p.d_dz.col(1).transpose();
}

double energy(const ElementDofs& dofs, const Eigen::VectorXd& U, const quad4::Matrix8d& k) {
  quad4::Vector8d ue;
  for (int a = 0; a < 8; ++a) ue[a] = dofs[a] >= 0 ? U[dofs[a]] : 0.0;
  return ue.dot(k * ue);
}

}  // namespace

void PredictBatch::resize(Eigen::Index k, Eigen::Index m) {
  Y.resize(k, m);
  dY_drho.resize(k, m);
  dY_dz1.resize(k, m);
  dY_dz2.resize(k, m);
}

void correlation_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& phi, double nugget, Eigen::MatrixXd& R) {
  const Eigen::Index n = X.rows();
  R.resize(n, n);
  // Upper triangle row by row, mirrored afterwards; every entry has one writer.
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    R(i, i) = 1.0 + nugget;
    for (Eigen::Index j = i + 1; j < n; ++j) R(i, j) = pair_correlation(X, Z, phi, i, j);
  }
  R.triangularView<Eigen::StrictlyLower>() = R.transpose().triangularView<Eigen::StrictlyLower>();
}

void predict_batch(const gp::MrLvgpModel& model, std::span<const double> rho,
                   std::span<const double> z1, std::span<const double> z2, PredictBatch& out) {
  const auto k = static_cast<Eigen::Index>(rho.size());
  out.resize(k, model.n_responses());
#pragma omp parallel for schedule(static)
  for (Eigen::Index e = 0; e < k; ++e) predict_one(model, rho[e], z1[e], z2[e], out, e);
}

void element_energies(std::span<const ElementDofs> dofs, const Eigen::VectorXd& U,
                      const BasisSet& basis, Eigen::MatrixXd& q) {
  const auto ne = static_cast<Eigen::Index>(dofs.size());
  q.resize(ne, 4);
#pragma omp parallel for schedule(static)
  for (Eigen::Index e = 0; e < ne; ++e) {
    quad4::Vector8d ue;
    for (int a = 0; a < 8; ++a) ue[a] = dofs[e][a] >= 0 ? U[dofs[e][a]] : 0.0;
    for (int i = 0; i < 4; ++i) q(e, i) = ue.dot(basis[i] * ue);
  }
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(static_cast<std::size_t>(cols) + 1, 0);
  for (int c : col) ++t.row_ptr[c + 1];
  for (int r = 0; r < cols; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  t.col.resize(col.size());
  t.val.resize(val.size());
  std::vector<int> fill(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (int r = 0; r < rows; ++r)
    for (int p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      const int slot = fill[col[p]]++;
      t.col[slot] = r;
      t.val[slot] = val[p];
    }
  return t;
}

void csr_multiply(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < a.rows; ++r) {
    double s = 0.0;
    for (int p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) s += a.val[p] * x[a.col[p]];
    y[r] = s;
  }
}

namespace serial {

void correlation_matrix(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                        const Eigen::VectorXd& phi, double nugget, Eigen::MatrixXd& R) {
  const Eigen::Index n = X.rows();
  R.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      R(i, j) = (i == j) ? 1.0 + nugget
                         : pair_correlation(X, Z, phi, std::min(i, j), std::max(i, j));
}

void predict_batch(const gp::MrLvgpModel& model, std::span<const double> rho,
                   std::span<const double> z1, std::span<const double> z2, PredictBatch& out) {
  const auto k = static_cast<Eigen::Index>(rho.size());
  out.resize(k, model.n_responses());
  for (Eigen::Index e = 0; e < k; ++e) predict_one(model, rho[e], z1[e], z2[e], out, e);
}

void element_energies(std::span<const ElementDofs> dofs, const Eigen::VectorXd& U,
                      const BasisSet& basis, Eigen::MatrixXd& q) {
  q.resize(static_cast<Eigen::Index>(dofs.size()), 4);
  for (std::size_t e = 0; e < dofs.size(); ++e)
    for (int i = 0; i < 4; ++i) q(static_cast<Eigen::Index>(e), i) = energy(dofs[e], U, basis[i]);
}

void csr_multiply(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  for (int r = 0; r < a.rows; ++r) {
    y[r] = 0.0;
    for (int p = a.row_ptr[r]; p < a.row_ptr[r + 1]; ++p) y[r] += a.val[p] * x[a.col[p]];
  }
}

}  // namespace serial

}  // namespace mctopo::kernels
