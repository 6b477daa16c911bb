#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Core>

namespace mctopo {

/// Independent plane-stress orthotropic components [C11, C12, C22, C66].
struct StiffnessVec {
  static constexpr std::size_t kSize = 4;
  std::array<double, kSize> c{};

  double c11() const { return c[0]; }
  double c12() const { return c[1]; }
  double c22() const { return c[2]; }
  double c66() const { return c[3]; }

  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }

  /// C11 > 0, C22 > 0, C66 > 0 and C11*C22 - C12^2 > 0.
  bool positive_definite() const {
    return c[0] > 0.0 && c[2] > 0.0 && c[3] > 0.0 && c[0] * c[2] - c[1] * c[1] > 0.0;
  }

  /// Voigt-ordered 3x3 constitutive matrix (engineering shear strain).
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d d;
    d << c[0], c[1], 0.0, c[1], c[2], 0.0, 0.0, 0.0, c[3];
    return d;
  }

  static StiffnessVec from(const Eigen::Vector4d& v) { return {{v[0], v[1], v[2], v[3]}}; }
  Eigen::Vector4d vec() const { return {c[0], c[1], c[2], c[3]}; }
};

inline constexpr std::array<const char*, 4> kStiffnessNames{"C11", "C12", "C22", "C66"};

}  // namespace mctopo
