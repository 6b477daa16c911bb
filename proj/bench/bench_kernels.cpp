// Serial reference vs OpenMP kernels on desk-scale problem sizes.
#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "mctopo/fea.hpp"
#include "mctopo/gp.hpp"
#include "mctopo/kernels.hpp"
#include "mctopo/problems.hpp"
#include "mctopo/topopt.hpp"

using namespace mctopo;

namespace {

// 120-row synthetic library with smooth power-law responses; hyperparameters fixed.
const gp::MrLvgpModel& model() {
  static const gp::MrLvgpModel m = [] {
    std::vector<homog::DatasetRow> rows;
    for (int c = 1; c <= 6; ++c)
      for (int k = 0; k < 20; ++k) {
        const double v = 0.1 + 0.85 * k / 19.0, a = 1.0 + 0.2 * c;
        rows.push_back({c, v, {{std::pow(v, a), 0.3 * std::pow(v, a + 0.5), std::pow(v, a + 0.1 * (c % 2)), 0.35 * std::pow(v, a + 1)}}});
      }
    gp::LatentMap lat;
    lat.Z.resize(6, 2);
    lat.Z << 0, 0, 0.3, 0, 0.1, 0.2, 0.2, -0.1, -0.2, 0.4, 0.4, 0.3;
    return gp::MrLvgpModel::build(gp::dataset_from_rows(rows), lat, Eigen::VectorXd::Constant(1, 2.0));
  }();
  return m;
}

Execution exec_of(const benchmark::State& s) { return s.range(0) ? Execution::Parallel : Execution::Serial; }
const char* label(const benchmark::State& s) { return s.range(0) ? "openmp" : "serial"; }

void BM_CorrelationMatrix(benchmark::State& state) {
  const auto& m = model();
  Eigen::MatrixXd Z(m.n_train(), 2);
  for (int i = 0; i < m.n_train(); ++i) Z.row(i) = m.anchor(m.data().levels[static_cast<std::size_t>(i)]).transpose();
  Eigen::MatrixXd R;
  for (auto _ : state) {
    if (state.range(0)) kernels::correlation_matrix(m.data().X, Z, m.phi(), 1e-5, R);
    else kernels::serial::correlation_matrix(m.data().X, Z, m.phi(), 1e-5, R);
    benchmark::DoNotOptimize(R.data());
  }
  state.SetLabel(label(state));
}

void BM_PredictBatch(benchmark::State& state) {
  const auto& m = model();
  const int n = 1600;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 0.95), z(-0.1, 0.4);
  std::vector<double> rho(n), z1(n), z2(n);
  for (int i = 0; i < n; ++i) rho[i] = u(rng), z1[i] = z(rng), z2[i] = z(rng);
  kernels::PredictBatch out;
  for (auto _ : state) {
    if (state.range(0)) kernels::predict_batch(m, rho, z1, z2, out);
    else kernels::serial::predict_batch(m, rho, z1, z2, out);
    benchmark::DoNotOptimize(out.Y.data());
  }
  state.SetLabel(label(state));
}

struct FeFixture {
  problems::MacroProblem prob = problems::l_beam();
  std::vector<kernels::ElementDofs> dofs;
  std::vector<fea::Matrix8d> ke;
  fea::FeSolver solver{prob.mesh, prob.loads[0].fixed_dofs};
  Eigen::VectorXd U;
  FeFixture() {
    const StiffnessVec Y{{0.5, 0.15, 0.5, 0.18}};
    for (int e : prob.mesh.active_elements()) {
      dofs.push_back(prob.mesh.element_dofs(e));
      ke.push_back(fea::element_stiffness(Y));
    }
    solver.factorize(ke);
    U = solver.solve(prob.loads[0].F);
  }
};
FeFixture& fe() {
  static FeFixture f;
  return f;
}

void BM_ElementEnergies(benchmark::State& state) {
  auto& f = fe();
  Eigen::MatrixXd q;
  for (auto _ : state) {
    if (state.range(0)) kernels::element_energies(f.dofs, f.U, fea::basis(), q);
    else kernels::serial::element_energies(f.dofs, f.U, fea::basis(), q);
    benchmark::DoNotOptimize(q.data());
  }
  state.SetLabel(label(state));
}

void BM_FilterApply(benchmark::State& state) {
  auto& f = fe();
  const topopt::ConeFilter filt(f.prob.mesh, 1.5);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(f.dofs.size()), 0.1, 0.9);
  for (auto _ : state) {
    const auto y = filt.apply(x, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetLabel(label(state));
}

void BM_FeFactorize(benchmark::State& state) {
  auto& f = fe();
  for (auto _ : state) f.solver.factorize(f.ke, exec_of(state));
  state.SetLabel(label(state));
}

}  // namespace

BENCHMARK(BM_CorrelationMatrix)->Arg(0)->Arg(1);
BENCHMARK(BM_PredictBatch)->Arg(0)->Arg(1);
BENCHMARK(BM_ElementEnergies)->Arg(0)->Arg(1);
BENCHMARK(BM_FilterApply)->Arg(0)->Arg(1);
BENCHMARK(BM_FeFactorize)->Arg(0)->Arg(1);
BENCHMARK_MAIN();
