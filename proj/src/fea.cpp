#include "mctopo/fea.hpp"

#include <algorithm>
#include <cmath>

#include "mctopo/error.hpp"

namespace mctopo::fea {

MacroMesh MacroMesh::rectangle(int nx, int ny) {
  MacroMesh m;
  m.nx = nx;
  m.ny = ny;
  m.active.assign(static_cast<std::size_t>(std::max(nx, 0)) * std::max(ny, 0), 1);
  m.validate();
  return m;
}

std::vector<int> MacroMesh::active_elements() const {
  std::vector<int> out;
  for (int e = 0; e < n_elements(); ++e)
    if (is_active(e)) out.push_back(e);
  return out;
}

int MacroMesh::active_count() const {
  return static_cast<int>(std::count_if(active.begin(), active.end(), [](std::uint8_t a) { return a != 0; }));
}

kernels::ElementDofs MacroMesh::element_dofs(int e) const {
  const int i = e % nx, j = e / nx;
  kernels::ElementDofs d;
  for (int a = 0; a < 4; ++a) {
    const int n = node(i + quad4::kNodeOffsets[a][0], j + quad4::kNodeOffsets[a][1]);
    d[2 * a] = 2 * n;
    d[2 * a + 1] = 2 * n + 1;
  }
  return d;
}

Eigen::Vector2d MacroMesh::centroid(int e) const { return {e % nx + 0.5, e / nx + 0.5}; }

void MacroMesh::validate() const {
  if (nx <= 0 || ny <= 0) throw Error(ErrorKind::InvalidInput, "mesh needs nx, ny >= 1");
  if (active.size() != static_cast<std::size_t>(nx) * ny)
    throw Error(ErrorKind::InvalidInput, "active mask size does not match the mesh");
}

const kernels::BasisSet& basis() {
  static const kernels::BasisSet k = [] {
    kernels::BasisSet b;
    for (int i = 0; i < 4; ++i) {
      StiffnessVec unit;
      unit[static_cast<std::size_t>(i)] = 1.0;
      b[static_cast<std::size_t>(i)] = quad4::stiffness(unit.matrix());
    }
    return b;
  }();
  return k;
}

Matrix8d element_stiffness(const StiffnessVec& Y) {
  for (double v : Y.c)
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidStiffness, "non-finite stiffness component");
  if (!Y.positive_definite())
    throw Error(ErrorKind::InvalidStiffness, "stiffness [C11 C12 C22 C66] is not positive definite");
  const auto& b = basis();
  return Y[0] * b[0] + Y[1] * b[1] + Y[2] * b[2] + Y[3] * b[3];
}

FeSolver::FeSolver(const MacroMesh& mesh, std::vector<int> fixed_dofs)
    : mesh_(mesh), fixed_(std::move(fixed_dofs)) {
  mesh_.validate();
  if (mesh_.active_count() == 0) throw Error(ErrorKind::InvalidInput, "mesh has no active elements");
  const int nd = mesh_.n_dofs();
  std::vector<std::uint8_t> used(static_cast<std::size_t>(nd), 0);
  active_ = mesh_.active_elements();
  for (int e : active_)
    for (int d : mesh_.element_dofs(e)) used[static_cast<std::size_t>(d)] = 1;
  for (int d : fixed_) {
    if (d < 0 || d >= nd) throw Error(ErrorKind::InvalidInput, "fixed dof out of range");
    used[static_cast<std::size_t>(d)] = 0;
  }
  reduced_.assign(static_cast<std::size_t>(nd), -1);
  for (int d = 0; d < nd; ++d)
    if (used[static_cast<std::size_t>(d)]) reduced_[static_cast<std::size_t>(d)] = n_free_++;
  if (n_free_ == 0) throw Error(ErrorKind::Mechanism, "no free degrees of freedom");

  edofs_.resize(active_.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(active_.size() * 64);
  for (std::size_t k = 0; k < active_.size(); ++k) {
    const auto g = mesh_.element_dofs(active_[k]);
    for (int a = 0; a < 8; ++a) edofs_[k][a] = reduced_[static_cast<std::size_t>(g[a])];
    for (int a = 0; a < 8; ++a)
      for (int b = 0; b < 8; ++b)
        if (edofs_[k][a] >= 0 && edofs_[k][b] >= 0) trip.emplace_back(edofs_[k][a], edofs_[k][b], 1.0);
  }
  K_.resize(n_free_, n_free_);
  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();
  // Map each element entry to its slot in the compressed value array.
  slots_.assign(active_.size() * 64, -1);
  for (std::size_t k = 0; k < active_.size(); ++k)
    for (int b = 0; b < 8; ++b) {
      const int c = edofs_[k][b];
      if (c < 0) continue;
      const int* rows = K_.innerIndexPtr();
      const int begin = K_.outerIndexPtr()[c], end = K_.outerIndexPtr()[c + 1];
      for (int a = 0; a < 8; ++a) {
        const int r = edofs_[k][a];
        if (r < 0) continue;
        const int* hit = std::lower_bound(rows + begin, rows + end, r);
        slots_[k * 64 + static_cast<std::size_t>(a * 8 + b)] = static_cast<int>(hit - rows);
      }
    }
  const int nnz = static_cast<int>(K_.nonZeros());
  gather_ptr_.assign(static_cast<std::size_t>(nnz) + 1, 0);
  for (int s : slots_)
    if (s >= 0) ++gather_ptr_[static_cast<std::size_t>(s) + 1];
  for (int s = 0; s < nnz; ++s) gather_ptr_[s + 1] += gather_ptr_[s];
  gather_.resize(static_cast<std::size_t>(gather_ptr_.back()));
  std::vector<int> fill(gather_ptr_.begin(), gather_ptr_.end() - 1);
  for (std::size_t src = 0; src < slots_.size(); ++src)
    if (slots_[src] >= 0) gather_[static_cast<std::size_t>(fill[slots_[src]]++)] = static_cast<int>(src);
}

void FeSolver::factorize(std::span<const Matrix8d> ke, Execution exec) {
  if (ke.size() != active_.size())
    throw Error(ErrorKind::InvalidInput, "need one element matrix per active element");
  double* val = K_.valuePtr();
  const int nnz = static_cast<int>(K_.nonZeros());
  if (exec == Execution::Parallel) {
    // Gather per slot over its contributors in element order: the same summation
    // order as the serial scatter, so both give bitwise-identical K.
#pragma omp parallel for schedule(static)
    for (int s = 0; s < nnz; ++s) {
      double v = 0.0;
      for (int p = gather_ptr_[s]; p < gather_ptr_[s + 1]; ++p) {
        const int src = gather_[static_cast<std::size_t>(p)];
        v += ke[static_cast<std::size_t>(src / 64)](src % 64 / 8, src % 8);
      }
      val[s] = v;
    }
  } else {
    std::fill(val, val + nnz, 0.0);
    for (std::size_t k = 0; k < active_.size(); ++k)
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
          const int s = slots_[k * 64 + static_cast<std::size_t>(a * 8 + b)];
          if (s >= 0) val[s] += ke[k](a, b);
        }
  }
  if (!analyzed_) {
    llt_.analyzePattern(K_);
    analyzed_ = true;
  }
  llt_.factorize(K_);
  if (llt_.info() != Eigen::Success)
    throw Error(ErrorKind::Mechanism, "stiffness matrix is singular (insufficient supports?)");
  // Cholesky succeeds numerically on some near-mechanisms; reject tiny pivots too.
  const Eigen::VectorXd diag = llt_.matrixL().nestedExpression().diagonal();
  const double dmax = diag.cwiseAbs().maxCoeff(), dmin = diag.cwiseAbs().minCoeff();
  if (!(dmin * dmin > 1e-13 * dmax * dmax))
    throw Error(ErrorKind::Mechanism, "stiffness matrix is numerically singular");
}

Eigen::VectorXd FeSolver::solve(const Eigen::VectorXd& F) const {
  if (F.size() != mesh_.n_dofs()) throw Error(ErrorKind::InvalidInput, "load vector has the wrong length");
  if (!F.allFinite()) throw Error(ErrorKind::InvalidInput, "load vector is not finite");
  Eigen::VectorXd f(n_free_);
  for (int d = 0; d < mesh_.n_dofs(); ++d) {
    const int r = reduced_[static_cast<std::size_t>(d)];
    if (r >= 0) f[r] = F[d];
  }
  const Eigen::VectorXd u = llt_.solve(f);
  Eigen::VectorXd U = Eigen::VectorXd::Zero(mesh_.n_dofs());
  for (int d = 0; d < mesh_.n_dofs(); ++d) {
    const int r = reduced_[static_cast<std::size_t>(d)];
    if (r >= 0) U[d] = u[r];
  }
  return U;
}

double FeSolver::residual(const Eigen::VectorXd& F, const Eigen::VectorXd& U) const {
  Eigen::VectorXd f(n_free_), u(n_free_);
  for (int d = 0; d < mesh_.n_dofs(); ++d) {
    const int r = reduced_[static_cast<std::size_t>(d)];
    if (r >= 0) {
      f[r] = F[d];
      u[r] = U[d];
    }
  }
  const double fn = f.norm();
  return fn > 0.0 ? (K_ * u - f).norm() / fn : (K_ * u).norm();
}

double Analysis::mean_compliance() const {
  double s = 0.0;
  for (double c : compliance) s += c;
  return compliance.empty() ? 0.0 : s / static_cast<double>(compliance.size());
}

Analyzer::Analyzer(const MacroMesh& mesh, std::vector<LoadCase> loads) : mesh_(mesh), loads_(std::move(loads)) {
  if (loads_.empty()) throw Error(ErrorKind::InvalidInput, "at least one load case is required");
  for (const auto& lc : loads_) {
    if (lc.F.size() != mesh_.n_dofs()) throw Error(ErrorKind::InvalidInput, "load vector has the wrong length");
    if (!lc.F.allFinite()) throw Error(ErrorKind::InvalidInput, "load vector is not finite");
    if (lc.F.squaredNorm() > 0.0 && lc.fixed_dofs.empty())
      throw Error(ErrorKind::Mechanism, "loaded structure has no supports");
    auto key = lc.fixed_dofs;
    std::sort(key.begin(), key.end());
    int found = -1;
    for (std::size_t s = 0; s < solvers_.size(); ++s) {
      auto other = solvers_[s]->fixed_dofs();
      std::sort(other.begin(), other.end());
      if (other == key) found = static_cast<int>(s);
    }
    if (found < 0) {
      solvers_.push_back(std::make_unique<FeSolver>(mesh_, lc.fixed_dofs));
      found = static_cast<int>(solvers_.size()) - 1;
    }
    // Loads on dofs that the model eliminates would silently vanish.
    const auto& red = solvers_[static_cast<std::size_t>(found)]->reduced_index();
    const auto fixed_set = key;
    for (int d = 0; d < mesh_.n_dofs(); ++d)
      if (lc.F[d] != 0.0 && red[static_cast<std::size_t>(d)] < 0 &&
          !std::binary_search(fixed_set.begin(), fixed_set.end(), d))
        throw Error(ErrorKind::InvalidInput, "load applied to a dof of passive elements only");
    solver_of_.push_back(found);
  }
}

Analysis Analyzer::run(std::span<const Matrix8d> ke, Execution exec) {
  for (auto& s : solvers_) s->factorize(ke, exec);
  Analysis out;
  out.U.resize(loads_.size());
  out.compliance.resize(loads_.size());
  for (std::size_t l = 0; l < loads_.size(); ++l) {
    out.U[l] = solvers_[static_cast<std::size_t>(solver_of_[l])]->solve(loads_[l].F);
    out.compliance[l] = loads_[l].F.dot(out.U[l]);
  }
  return out;
}

Analysis solve(const MacroMesh& mesh, const std::vector<LoadCase>& loads, std::span<const Matrix8d> ke) {
  Analyzer a(mesh, loads);
  return a.run(ke);
}

quad4::Vector8d element_displacement(const MacroMesh& mesh, int e, const Eigen::VectorXd& U) {
  const auto d = mesh.element_dofs(e);
  quad4::Vector8d u;
  for (int a = 0; a < 8; ++a) u[a] = U[d[a]];
  return u;
}

double strain_energy_sum(const MacroMesh& mesh, std::span<const Matrix8d> ke, const Eigen::VectorXd& U) {
  const auto act = mesh.active_elements();
  if (ke.size() != act.size()) throw Error(ErrorKind::InvalidInput, "need one element matrix per active element");
  double s = 0.0;
  for (std::size_t k = 0; k < act.size(); ++k) {
    const auto u = element_displacement(mesh, act[k], U);
    s += u.dot(ke[k] * u);
  }
  return s;
}

}  // namespace mctopo::fea
