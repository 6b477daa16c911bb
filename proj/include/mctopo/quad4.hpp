#pragma once

#include <array>

#include <Eigen/Core>

// Bilinear 4-node square element of side 1, plane stress, unit thickness.
// Local nodes counter-clockwise from the lower-left corner: (0,0) (1,0) (1,1) (0,1);
// dof layout [u0x u0y u1x u1y u2x u2y u3x u3y].
namespace mctopo::quad4 {

using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Vector8d = Eigen::Matrix<double, 8, 1>;
using BMatrix = Eigen::Matrix<double, 3, 8>;

inline constexpr std::array<std::array<int, 2>, 4> kNodeOffsets{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};

/// Strain-displacement matrix at natural coordinates (xi, eta) in [-1, 1]^2.
BMatrix strain_displacement(double xi, double eta);

/// k = integral of B^T D B over the element, 2x2 Gauss quadrature (exact for this element).
Matrix8d stiffness(const Eigen::Matrix3d& d);

Eigen::Matrix3d isotropic_plane_stress(double young, double poisson);

/// Nodal displacements reproducing the uniform strain (e11, e22, g12) over the element.
Vector8d uniform_strain_displacement(double e11, double e22, double g12);

}  // namespace mctopo::quad4
