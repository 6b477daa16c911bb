#include "mctopo/penalty.hpp"

#include <algorithm>
#include <cmath>

#include "mctopo/error.hpp"

namespace mctopo::penalty {

void PenaltyParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidInput, "penalty lambda must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorKind::InvalidInput, "penalty gamma must be > 0");
  if (anchors.empty()) throw Error(ErrorKind::InvalidInput, "penalty needs at least one anchor");
}

double bounding_diagonal(const std::vector<Eigen::Vector2d>& anchors) {
  if (anchors.empty()) return 0.0;
  Eigen::Vector2d lo = anchors.front(), hi = anchors.front();
  for (const auto& a : anchors) {
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
  }
  return (hi - lo).norm();
}

PenaltyParams make_penalty(std::vector<Eigen::Vector2d> anchors, double lambda,
                           std::optional<double> gamma_override) {
  PenaltyParams p;
  p.lambda = lambda;
  p.anchors = std::move(anchors);
  if (gamma_override) {
    p.gamma = *gamma_override;
  } else {
    const double d = bounding_diagonal(p.anchors);
    p.gamma = d > 0.0 ? d : 1.0;
  }
  p.validate();
  return p;
}

double penalty_f_grad(const Eigen::Vector2d& z, const PenaltyParams& p, Eigen::Vector2d& grad) {
  const std::size_t q = p.anchors.size();
  // e_t in a small stack-friendly buffer; anchor counts are tiny
  std::vector<double> e(q);
  double emax = 0.0;
  for (std::size_t t = 0; t < q; ++t) {
    e[t] = std::exp(-(z - p.anchors[t]).squaredNorm() / p.gamma);
    emax = std::max(emax, e[t]);
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < q; ++t) sum += std::exp(p.lambda * (e[t] - emax));
  grad.setZero();
  for (std::size_t t = 0; t < q; ++t) {
    const double w = std::exp(p.lambda * (e[t] - emax)) / sum;
    grad += w * e[t] * (-2.0 / p.gamma) * (z - p.anchors[t]);
  }
  return emax + std::log(sum) / p.lambda;
}

double penalty_f(const Eigen::Vector2d& z, const PenaltyParams& p) {
  Eigen::Vector2d g;
  return penalty_f_grad(z, p, g);
}

Eigen::Vector2d penalty_grad(const Eigen::Vector2d& z, const PenaltyParams& p) {
  Eigen::Vector2d g;
  penalty_f_grad(z, p, g);
  return g;
}

double nearest_kernel(const Eigen::Vector2d& z, const PenaltyParams& p) {
  double m = 0.0;
  for (const auto& a : p.anchors) m = std::max(m, std::exp(-(z - a).squaredNorm() / p.gamma));
  return m;
}

}  // namespace mctopo::penalty
