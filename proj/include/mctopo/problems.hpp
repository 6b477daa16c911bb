#pragma once

#include <string>
#include <vector>

#include "mctopo/fea.hpp"

// Benchmark macro problems on unit-square element grids.
namespace mctopo::problems {

struct MacroProblem {
  std::string name;
  fea::MacroMesh mesh;
  std::vector<fea::LoadCase> loads;
};

/// n x n square with the top-right (n - arm) x (n - arm) block passive. The top edge
/// of the vertical arm is clamped; a unit downward force acts at the upper-right
/// corner of the horizontal arm. Default 40 / 14 leaves 924 design elements.
MacroProblem l_beam(int n = 40, int arm = 14);

/// Simply supported beam (pin at the lower-left corner, roller at the lower-right)
/// with two load cases: a unit downward force at mid-span of the bottom edge, and
/// two downward forces of 0.5 at the bottom quarter points.
MacroProblem mbb_two_load(int nx = 60, int ny = 30);

/// Cantilever clamped on the left edge with a unit downward tip load at the
/// middle of the right edge.
MacroProblem cantilever(int nx, int ny);

MacroProblem by_name(const std::string& name, int nx = 0, int ny = 0);

}  // namespace mctopo::problems
