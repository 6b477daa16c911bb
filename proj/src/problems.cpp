#include "mctopo/problems.hpp"

#include "mctopo/error.hpp"

namespace mctopo::problems {

namespace {

void fix_node(const fea::MacroMesh& m, std::vector<int>& fixed, int i, int j, bool x, bool y) {
  const int n = m.node(i, j);
  if (x) fixed.push_back(2 * n);
  if (y) fixed.push_back(2 * n + 1);
}

void push_down(const fea::MacroMesh& m, Eigen::VectorXd& F, int i, int j, double magnitude) {
  F[2 * m.node(i, j) + 1] -= magnitude;
}

}  // namespace

MacroProblem l_beam(int n, int arm) {
  if (n < 2 || arm < 1 || arm >= n) throw Error(ErrorKind::InvalidInput, "L-beam needs 1 <= arm < n");
  MacroProblem p;
  p.name = "l_beam";
  p.mesh = fea::MacroMesh::rectangle(n, n);
  for (int j = arm; j < n; ++j)
    for (int i = arm; i < n; ++i) p.mesh.active[static_cast<std::size_t>(p.mesh.element(i, j))] = 0;
  fea::LoadCase lc;
  lc.F = Eigen::VectorXd::Zero(p.mesh.n_dofs());
  for (int i = 0; i <= arm; ++i) fix_node(p.mesh, lc.fixed_dofs, i, n, true, true);
  push_down(p.mesh, lc.F, n, arm, 1.0);
  p.loads.push_back(std::move(lc));
  return p;
}

MacroProblem mbb_two_load(int nx, int ny) {
  if (nx < 4 || ny < 1 || nx % 4 != 0) throw Error(ErrorKind::InvalidInput, "MBB needs nx divisible by 4");
  MacroProblem p;
  p.name = "mbb_two_load";
  p.mesh = fea::MacroMesh::rectangle(nx, ny);
  std::vector<int> fixed;
  fix_node(p.mesh, fixed, 0, 0, true, true);
  fix_node(p.mesh, fixed, nx, 0, false, true);
  fea::LoadCase mid{Eigen::VectorXd::Zero(p.mesh.n_dofs()), fixed};
  push_down(p.mesh, mid.F, nx / 2, 0, 1.0);
  fea::LoadCase quarters{Eigen::VectorXd::Zero(p.mesh.n_dofs()), fixed};
  push_down(p.mesh, quarters.F, nx / 4, 0, 0.5);
  push_down(p.mesh, quarters.F, 3 * nx / 4, 0, 0.5);
  p.loads = {std::move(mid), std::move(quarters)};
  return p;
}

MacroProblem cantilever(int nx, int ny) {
  if (nx < 1 || ny < 1) throw Error(ErrorKind::InvalidInput, "cantilever needs nx, ny >= 1");
  MacroProblem p;
  p.name = "cantilever";
  p.mesh = fea::MacroMesh::rectangle(nx, ny);
  fea::LoadCase lc{Eigen::VectorXd::Zero(p.mesh.n_dofs()), {}};
  for (int j = 0; j <= ny; ++j) fix_node(p.mesh, lc.fixed_dofs, 0, j, true, true);
  if (ny % 2 == 0) {
    push_down(p.mesh, lc.F, nx, ny / 2, 1.0);
  } else {
    push_down(p.mesh, lc.F, nx, ny / 2, 0.5);
    push_down(p.mesh, lc.F, nx, ny / 2 + 1, 0.5);
  }
  p.loads.push_back(std::move(lc));
  return p;
}

MacroProblem by_name(const std::string& name, int nx, int ny) {
  if (name == "l_beam") {
    // ny is ignored: the L-beam is square, arm width 0.35 n
    const int n = nx > 0 ? nx : 40;
    return l_beam(n, (n * 14 + 20) / 40);
  }
  if (name == "mbb_two_load") return mbb_two_load(nx > 0 ? nx : 60, ny > 0 ? ny : 30);
  if (name == "cantilever") return cantilever(nx > 0 ? nx : 20, ny > 0 ? ny : 10);
  throw Error(ErrorKind::Config, "unknown problem '" + name + "' (l_beam, mbb_two_load, cantilever)");
}

}  // namespace mctopo::problems
