#include <doctest.h>

#include <cmath>

#include "mctopo/error.hpp"
#include "mctopo/homog.hpp"
#include "mctopo/microlib.hpp"

using namespace mctopo;
using namespace mctopo::homog;
using microlib::PixelGrid;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

PixelGrid solid_grid(int n) { return PixelGrid(n, 1); }

// Horizontal laminate: the first `rows` pixel rows solid.
PixelGrid laminate(int n, int rows) {
  PixelGrid g(n);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i < n; ++i) g.set(i, j, true);
  return g;
}

// Exact effective stiffness of a two-phase laminate (layers normal to y) whose
// phases share nu: C22 = H, C12 = nu H, C11 = <a>(1 - nu^2) + nu^2 H, C66 = <1/G>^-1,
// with a = E / (1 - nu^2) and H the harmonic mean of a.
StiffnessVec laminate_oracle(double vf, double E1, double E2, double nu) {
  const double a1 = E1 / (1 - nu * nu), a2 = E2 / (1 - nu * nu);
  const double H = 1.0 / (vf / a1 + (1 - vf) / a2);
  const double mean_a = vf * a1 + (1 - vf) * a2;
  const double G1 = E1 / (2 * (1 + nu)), G2 = E2 / (2 * (1 + nu));
  return {{mean_a * (1 - nu * nu) + nu * nu * H, nu * H, H, 1.0 / (vf / G1 + (1 - vf) / G2)}};
}

}  // namespace

TEST_CASE("all-solid cell reproduces the plane-stress matrix") {
  const BaseMaterial m;
  const double nu = m.nu;
  const auto Y = homogenize(solid_grid(40), m);
  CHECK(rel(Y.c11(), 1 / (1 - nu * nu)) < 1e-6);
  CHECK(rel(Y.c22(), 1 / (1 - nu * nu)) < 1e-6);
  CHECK(rel(Y.c12(), nu / (1 - nu * nu)) < 1e-6);
  CHECK(rel(Y.c66(), 1 / (2 * (1 + nu))) < 1e-6);
}

TEST_CASE("linear in E") {
  const auto g = microlib::rasterize(microlib::micro_class(4), 0.1, 40);
  BaseMaterial m1, m2;
  m2.E = 2.0;
  const auto a = homogenize(g, m1), b = homogenize(g, m2);
  for (std::size_t k = 0; k < 4; ++k) CHECK(rel(b[k], 2 * a[k]) < 1e-10);
}

TEST_CASE("laminate matches the exact layered-medium stiffness") {
  BaseMaterial m;
  m.void_ratio = 1e-4;
  for (int rows : {8, 20, 32}) {
    const auto Y = homogenize(laminate(40, rows), m);
    const auto ref = laminate_oracle(rows / 40.0, m.E, m.E_void(), m.nu);
    for (std::size_t k = 0; k < 4; ++k) CHECK(rel(Y[k], ref[k]) < 1e-7);
    const auto Yt = homogenize(laminate(40, rows).transposed(), m);
    CHECK(rel(Yt.c11(), ref.c22()) < 1e-7);
    CHECK(rel(Yt.c22(), ref.c11()) < 1e-7);
  }
}

TEST_CASE("diagonal rods resist shear better than orthogonal rods") {
  const BaseMaterial m;
  const auto a = microlib::solve_thickness(microlib::micro_class(1), 0.5);
  const auto b = microlib::solve_thickness(microlib::micro_class(2), 0.5);
  const auto ya = homogenize(microlib::rasterize(microlib::micro_class(1), a.thickness), m);
  const auto yb = homogenize(microlib::rasterize(microlib::micro_class(2), b.thickness), m);
  CHECK(yb.c66() > ya.c66());
  CHECK(ya.c11() > yb.c11());
}

TEST_CASE("errors") {
  const BaseMaterial m;
  try {
    homogenize(PixelGrid(20), m);
    FAIL("expected degenerate cell");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateCell);
  }
  // One diagonal family of rods couples normal and shear response.
  PixelGrid diag(40);
  for (int j = 0; j < 40; ++j)
    for (int d = -2; d <= 2; ++d) diag.set(((j + d) % 40 + 40) % 40, j, true);
  try {
    homogenize(diag, m);
    FAIL("expected non-orthotropic cell");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonOrthotropicCell);
  }
  BaseMaterial bad;
  bad.nu = 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("library properties (reduced resolution)") {
  const BaseMaterial m;
  const auto lib = microlib::build_library(5, 0.3, 0.9, 40);
  const auto rows = homogenize_library(lib, m);
  REQUIRE(rows.size() == 30);
  const auto nu = m.nu;
  const StiffnessVec solid{{1 / (1 - nu * nu), nu / (1 - nu * nu), 1 / (1 - nu * nu), 1 / (2 * (1 + nu))}};
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const auto& r = rows[s];
    CHECK(r.class_id == lib[s].class_id);
    CHECK(r.vf == lib[s].achieved_vf);
    CHECK(r.Y.positive_definite());
    for (std::size_t k = 0; k < 4; ++k)
      CHECK(std::abs(r.Y[k]) <= r.vf * solid[k] + (1 - r.vf) * m.E_void() * solid[k] + 1e-12);
    if (microlib::micro_class(r.class_id).symmetry == microlib::Symmetry::Cubic)
      CHECK(std::abs(r.Y.c11() - r.Y.c22()) <= 1e-6 * r.Y.c11());
    if (r.class_id == 5) CHECK(r.Y.c11() > r.Y.c22());
    if (s % 5 > 0 && rows[s - 1].vf < r.vf)
      for (std::size_t k = 0; k < 4; ++k) CHECK(r.Y[k] >= rows[s - 1].Y[k]);
  }
  for (std::size_t s = 20; s < 25; ++s) {  // E vs F
    const auto &e = rows[s].Y, &f = rows[s + 5].Y;
    CHECK(rel(f.c11(), e.c22()) < 1e-6);
    CHECK(rel(f.c22(), e.c11()) < 1e-6);
    CHECK(rel(f.c12(), e.c12()) < 1e-6);
    CHECK(rel(f.c66(), e.c66()) < 1e-6);
  }
  const auto serial = homogenize_library(lib, m, Execution::Serial);
  for (std::size_t s = 0; s < rows.size(); ++s) CHECK(serial[s].Y.c == rows[s].Y.c);
}
