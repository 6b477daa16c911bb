#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

// Smooth "distance to the nearest class" penalty on a latent point:
//   f(z) = (1/lambda) ln sum_t exp(lambda * exp(-|z - z_t|^2 / gamma)).
namespace mctopo::penalty {

inline constexpr double kDefaultLambda = 500.0;

struct PenaltyParams {
  double lambda = kDefaultLambda;
  double gamma = 1.0;
  std::vector<Eigen::Vector2d> anchors;

  void validate() const;
};

/// Diagonal length of the anchors' axis-aligned bounding rectangle.
double bounding_diagonal(const std::vector<Eigen::Vector2d>& anchors);

/// gamma defaults to bounding_diagonal(anchors); a degenerate (single-point) cloud
/// falls back to 1.
PenaltyParams make_penalty(std::vector<Eigen::Vector2d> anchors, double lambda = kDefaultLambda,
                           std::optional<double> gamma_override = std::nullopt);

double penalty_f(const Eigen::Vector2d& z, const PenaltyParams& p);
Eigen::Vector2d penalty_grad(const Eigen::Vector2d& z, const PenaltyParams& p);
/// Value and gradient in one pass.
double penalty_f_grad(const Eigen::Vector2d& z, const PenaltyParams& p, Eigen::Vector2d& grad);

/// max_t exp(-|z - z_t|^2 / gamma): the non-smooth form the penalty approximates.
double nearest_kernel(const Eigen::Vector2d& z, const PenaltyParams& p);

}  // namespace mctopo::penalty
