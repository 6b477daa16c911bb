#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "mctopo/exec.hpp"
#include "mctopo/fea.hpp"
#include "mctopo/kernels.hpp"

namespace mctopo::topopt {

/// Cone-weight smoothing over active elements: w_ij = max(0, r_min - |c_i - c_j|),
/// rows normalized. Applied as y = H x; sensitivities map back with H^T.
class ConeFilter {
 public:
  ConeFilter(const fea::MacroMesh& mesh, double r_min);

  int size() const { return H_.rows; }
  double radius() const { return r_min_; }
  const kernels::CsrMatrix& matrix() const { return H_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& x, Execution exec = Execution::Parallel) const;
  Eigen::VectorXd back(const Eigen::VectorXd& g, Execution exec = Execution::Parallel) const;

 private:
  double r_min_;
  kernels::CsrMatrix H_, Ht_;
};

}  // namespace mctopo::topopt
