#pragma once

#include <Eigen/Core>

// Method of moving asymptotes for box-bounded minimization with at most one
// inequality constraint f1(x) <= 0. The convex separable subproblem is solved
// through its scalar dual.
namespace mctopo::mma {

struct MmaSettings {
  double move_limit = 0.2;  // fraction of each variable's range
  double asy_init = 0.5;
  double asy_decr = 0.7;
  double asy_incr = 1.2;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double dual_tol = 1e-9;
  void validate() const;
};

struct SubproblemInfo {
  double lambda = 0.0;
  /// Value of the convex approximation of f1 at the returned point (<= 0 when feasible).
  double approx_constraint = 0.0;
  /// Largest relative violation of the subproblem's stationarity/complementarity conditions.
  double kkt_residual = 0.0;
};

class MmaState {
 public:
  MmaState(Eigen::VectorXd xmin, Eigen::VectorXd xmax, MmaSettings settings = {});

  /// One outer iteration from the current design `x`. Returns the next design.
  /// Pass f1 = -1 and df1 = 0 for an unconstrained problem.
  Eigen::VectorXd update(const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& df0, double f1,
                         const Eigen::VectorXd& df1);

  int iteration() const { return iter_; }
  const Eigen::VectorXd& low() const { return low_; }
  const Eigen::VectorXd& upp() const { return upp_; }
  const Eigen::VectorXd& xmin() const { return xmin_; }
  const Eigen::VectorXd& xmax() const { return xmax_; }
  /// Per-variable bounds of the last subproblem (box intersected with the move window).
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const SubproblemInfo& last() const { return info_; }
  const MmaSettings& settings() const { return s_; }

 private:
  MmaSettings s_;
  Eigen::VectorXd xmin_, xmax_;
  Eigen::VectorXd x_prev_, x_prev2_;
  Eigen::VectorXd low_, upp_, alpha_, beta_;
  int iter_ = 0;
  SubproblemInfo info_;
};

}  // namespace mctopo::mma
