#include "mctopo/quad4.hpp"

#include <cmath>

namespace mctopo::quad4 {

BMatrix strain_displacement(double xi, double eta) {
  static constexpr double kXi[4] = {-1.0, 1.0, 1.0, -1.0};
  static constexpr double kEta[4] = {-1.0, -1.0, 1.0, 1.0};
  BMatrix b = BMatrix::Zero();
  for (int a = 0; a < 4; ++a) {
    // x = (1 + xi) / 2 on a unit element, so d/dx = 2 d/dxi.
    const double dndx = 0.5 * kXi[a] * (1.0 + kEta[a] * eta);
    const double dndy = 0.5 * kEta[a] * (1.0 + kXi[a] * xi);
    b(0, 2 * a) = dndx;
    b(1, 2 * a + 1) = dndy;
    b(2, 2 * a) = dndy;
    b(2, 2 * a + 1) = dndx;
  }
  return b;
}

Matrix8d stiffness(const Eigen::Matrix3d& d) {
  const double g = 1.0 / std::sqrt(3.0);
  const double pts[2] = {-g, g};
  Matrix8d k = Matrix8d::Zero();
  // Jacobian determinant of the unit square map is 1/4; Gauss weights are 1.
  for (double xi : pts)
    for (double eta : pts) {
      const BMatrix b = strain_displacement(xi, eta);
      k.noalias() += 0.25 * b.transpose() * d * b;
    }
  return 0.5 * (k + k.transpose());
}

Eigen::Matrix3d isotropic_plane_stress(double young, double poisson) {
  const double s = young / (1.0 - poisson * poisson);
  Eigen::Matrix3d d;
  d << s, s * poisson, 0.0, s * poisson, s, 0.0, 0.0, 0.0, s * (1.0 - poisson) / 2.0;
  return d;
}

Vector8d uniform_strain_displacement(double e11, double e22, double g12) {
  Vector8d u;
  for (int a = 0; a < 4; ++a) {
    const double x = kNodeOffsets[a][0], y = kNodeOffsets[a][1];
    u[2 * a] = e11 * x + 0.5 * g12 * y;
    u[2 * a + 1] = 0.5 * g12 * x + e22 * y;
  }
  return u;
}

}  // namespace mctopo::quad4
