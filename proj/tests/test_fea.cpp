#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "mctopo/error.hpp"
#include "mctopo/fea.hpp"
#include "mctopo/problems.hpp"

using namespace mctopo;
using namespace mctopo::fea;

namespace {

const StiffnessVec kSolid{{1.0 / 0.91, 0.3 / 0.91, 1.0 / 0.91, 1.0 / 2.6}};

// Direct 2x2 Gauss integration over the unit square in physical coordinates with
// nodes (0,0), (1,0), (1,1), (0,1).
Matrix8d direct_quad(const Eigen::Matrix3d& D) {
  Matrix8d k = Matrix8d::Zero();
  const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (double x : g)
    for (double y : g) {
      const double dNdx[4] = {-(1 - y), (1 - y), y, -y};
      const double dNdy[4] = {-(1 - x), -x, x, (1 - x)};
      Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        B(0, 2 * a) = dNdx[a];
        B(1, 2 * a + 1) = dNdy[a];
        B(2, 2 * a) = dNdy[a];
        B(2, 2 * a + 1) = dNdx[a];
      }
      k += 0.25 * B.transpose() * D * B;
    }
  return k;
}

std::vector<Matrix8d> uniform_ke(const MacroMesh& m, const StiffnessVec& Y) {
  return std::vector<Matrix8d>(static_cast<std::size_t>(m.active_count()), element_stiffness(Y));
}

}  // namespace

TEST_CASE("basis decomposition") {
  const auto& K = basis();
  for (const auto& k : K) CHECK((k - k.transpose()).norm() == 0.0);
  const Matrix8d ke = element_stiffness(kSolid);
  CHECK((ke - direct_quad(kSolid.matrix())).norm() <= 1e-12 * ke.norm());
  const StiffnessVec ortho{{0.7, 0.1, 0.3, 0.2}};
  const Matrix8d ko = element_stiffness(ortho);
  CHECK((ko - direct_quad(ortho.matrix())).norm() <= 1e-12 * ko.norm());
  Matrix8d sum = Matrix8d::Zero();
  for (std::size_t i = 0; i < 4; ++i) sum += ortho[i] * K[i];
  CHECK((sum - ko).norm() <= 1e-14 * ko.norm());

  StiffnessVec twice = ortho;
  for (auto& c : twice.c) c *= 2;
  CHECK((element_stiffness(twice) - 2 * ko).norm() <= 1e-14 * ko.norm());
}

TEST_CASE("rigid modes") {
  const Matrix8d k = element_stiffness(kSolid);
  quad4::Vector8d tx, ty, rot;
  for (int a = 0; a < 4; ++a) {
    const double x = quad4::kNodeOffsets[a][0], y = quad4::kNodeOffsets[a][1];
    tx.segment<2>(2 * a) << 1, 0;
    ty.segment<2>(2 * a) << 0, 1;
    rot.segment<2>(2 * a) << -y, x;
  }
  CHECK((k * tx).norm() <= 1e-12);
  CHECK((k * ty).norm() <= 1e-12);
  CHECK((k * rot).norm() <= 1e-12);
  const auto ev = Eigen::SelfAdjointEigenSolver<Matrix8d>(k).eigenvalues();
  int zeros = 0;
  for (int i = 0; i < 8; ++i) zeros += std::abs(ev[i]) < 1e-12 * ev.maxCoeff();
  CHECK(zeros == 3);
  CHECK(ev.minCoeff() > -1e-12);
}

TEST_CASE("invalid stiffness") {
  for (StiffnessVec bad : {StiffnessVec{{1, 2, 1, 0.3}}, StiffnessVec{{-1, 0, 1, 0.3}}, StiffnessVec{{1, 0, 1, 0}},
                           StiffnessVec{{1, 0, NAN, 0.3}}}) {
    try {
      element_stiffness(bad);
      FAIL("expected invalid stiffness");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidStiffness);
    }
  }
}

TEST_CASE("single-element patch test: uniform uniaxial stress") {
  const auto mesh = MacroMesh::rectangle(1, 1);
  // roller on the left edge, one pin for the y rigid mode; unit traction on the right edge
  LoadCase lc{Eigen::VectorXd::Zero(mesh.n_dofs()), {2 * mesh.node(0, 0), 2 * mesh.node(0, 0) + 1, 2 * mesh.node(0, 1)}};
  lc.F[2 * mesh.node(1, 0)] = 0.5;
  lc.F[2 * mesh.node(1, 1)] = 0.5;
  for (const StiffnessVec& Y : {kSolid, StiffnessVec{{0.7, 0.1, 0.3, 0.2}}}) {
    const auto ke = uniform_ke(mesh, Y);
    const auto a = solve(mesh, {lc}, ke);
    const Eigen::Vector3d eps = Y.matrix().ldlt().solve(Eigen::Vector3d(1, 0, 0));
    const auto& U = a.U[0];
    CHECK(std::abs(U[2 * mesh.node(1, 0)] - eps[0]) <= 1e-9 * eps[0]);
    CHECK(std::abs(U[2 * mesh.node(1, 1)] - eps[0]) <= 1e-9 * eps[0]);
    CHECK(std::abs(U[2 * mesh.node(0, 1) + 1] - eps[1]) <= 1e-9 * std::abs(eps[1]));
    CHECK(std::abs(U[2 * mesh.node(1, 1) + 1] - eps[1]) <= 1e-9 * std::abs(eps[1]));
    CHECK(std::abs(a.compliance[0] - eps[0]) <= 1e-9 * eps[0]);
  }
}

TEST_CASE("cantilever solve properties") {
  const auto p = problems::cantilever(12, 6);
  auto ke = uniform_ke(p.mesh, kSolid);
  Analyzer an(p.mesh, p.loads);
  const auto a = an.run(ke);
  const double c = a.compliance[0];
  CHECK(c > 0.0);
  FeSolver s(p.mesh, p.loads[0].fixed_dofs);
  s.factorize(ke);
  const auto U = s.solve(p.loads[0].F);
  CHECK(s.residual(p.loads[0].F, U) <= 1e-10);
  CHECK((U - a.U[0]).norm() == 0.0);
  CHECK(std::abs(strain_energy_sum(p.mesh, ke, U) - c) <= 1e-9 * c);
  for (int d : p.loads[0].fixed_dofs) CHECK(U[d] == 0.0);

  SUBCASE("zero load") {
    LoadCase z{Eigen::VectorXd::Zero(p.mesh.n_dofs()), p.loads[0].fixed_dofs};
    const auto r = solve(p.mesh, {z}, ke);
    CHECK(r.U[0].norm() == 0.0);
    CHECK(r.compliance[0] == 0.0);
  }
  SUBCASE("doubling stiffness halves compliance") {
    StiffnessVec Y2 = kSolid;
    for (auto& v : Y2.c) v *= 2;
    const auto r = solve(p.mesh, p.loads, uniform_ke(p.mesh, Y2));
    CHECK(std::abs(r.compliance[0] - c / 2) <= 1e-12 * c);
  }
  SUBCASE("stiffening any element lowers compliance") {
    for (int e : {0, 17, 40, 71}) {
      auto k2 = ke;
      k2[static_cast<std::size_t>(e)] *= 1.5;
      CHECK(solve(p.mesh, p.loads, k2).compliance[0] < c);
    }
  }
  SUBCASE("serial and parallel assembly agree bitwise") {
    FeSolver a1(p.mesh, p.loads[0].fixed_dofs), a2(p.mesh, p.loads[0].fixed_dofs);
    for (std::size_t e = 0; e < ke.size(); ++e) ke[e] *= 1.0 + 0.01 * static_cast<double>(e % 7);
    a1.factorize(ke, Execution::Serial);
    a2.factorize(ke, Execution::Parallel);
    CHECK(a1.solve(p.loads[0].F) == a2.solve(p.loads[0].F));
  }
  SUBCASE("refactorizing reuses the analysis") {
    s.factorize(ke);
    CHECK(s.solve(p.loads[0].F) == U);
  }
}

TEST_CASE("mechanisms") {
  const auto mesh = MacroMesh::rectangle(4, 2);
  const auto ke = uniform_ke(mesh, kSolid);
  Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.n_dofs());
  F[2 * mesh.node(4, 1) + 1] = -1.0;
  auto expect_mechanism = [&](std::vector<int> fixed) {
    try {
      solve(mesh, {{F, std::move(fixed)}}, ke);
      FAIL("expected mechanism");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Mechanism);
    }
  };
  expect_mechanism({});
  expect_mechanism({0, 2 * mesh.node(0, 1)});          // x only: free vertical translation
  expect_mechanism({0, 1});                              // single pin: free rotation
  CHECK_NOTHROW(solve(mesh, {{F, {0, 1, 2 * mesh.node(0, 1)}}}, ke));
}

TEST_CASE("passive elements and multiple load cases") {
  const auto p = problems::l_beam(10, 4);
  CHECK(p.mesh.active_count() == 100 - 36);
  const auto ke = uniform_ke(p.mesh, kSolid);
  const auto a = solve(p.mesh, p.loads, ke);
  CHECK(a.compliance[0] > 0.0);
  // nodes interior to the cutout carry no displacement
  const int inner = p.mesh.node(8, 8);
  CHECK(a.U[0][2 * inner] == 0.0);
  CHECK(a.U[0][2 * inner + 1] == 0.0);
  // loading a dof owned only by passive elements is rejected
  auto bad = p.loads;
  bad[0].F[2 * inner + 1] = 1.0;
  CHECK_THROWS_AS(solve(p.mesh, bad, ke), Error);

  const auto mbb = problems::mbb_two_load(12, 6);
  REQUIRE(mbb.loads.size() == 2);
  const auto km = uniform_ke(mbb.mesh, kSolid);
  const auto r = solve(mbb.mesh, mbb.loads, km);
  CHECK(r.mean_compliance() == doctest::Approx(0.5 * (r.compliance[0] + r.compliance[1])).epsilon(1e-15));
  for (std::size_t l = 0; l < 2; ++l) {
    const auto one = solve(mbb.mesh, {mbb.loads[l]}, km);
    CHECK(one.compliance[0] == doctest::Approx(r.compliance[l]).epsilon(1e-13));
  }
}

TEST_CASE("mesh indexing") {
  const auto m = MacroMesh::rectangle(3, 2);
  CHECK(m.n_nodes() == 12);
  CHECK(m.element(2, 1) == 5);
  CHECK(m.centroid(5) == Eigen::Vector2d(2.5, 1.5));
  const auto d = m.element_dofs(5);
  CHECK(d[0] == 2 * m.node(2, 1));
  CHECK(d[2] == 2 * m.node(3, 1));
  CHECK(d[4] == 2 * m.node(3, 2));
  CHECK(d[6] == 2 * m.node(2, 2));
  MacroMesh none = m;
  std::fill(none.active.begin(), none.active.end(), 0);
  CHECK_THROWS_AS(FeSolver(none, {0}), Error);
}
