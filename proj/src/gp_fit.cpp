#include <cmath>
#include <limits>
#include <random>

#include <ceres/ceres.h>

#include "mctopo/error.hpp"
#include "mctopo/gp.hpp"

namespace mctopo::gp {

namespace {

// Parameters: [free latent coordinates..., log phi...].
class ProfileLikelihood final : public ceres::FirstOrderFunction {
 public:
  ProfileLikelihood(const Design& design, const Eigen::MatrixXd& D, int n_levels, int n_phi,
                    double nugget)
      : design_(design), D_(D), n_levels_(n_levels), n_phi_(n_phi), nugget_(nugget) {}

  bool Evaluate(const double* params, double* cost, double* gradient) const override {
    const int n_free = LatentMap::free_count(n_levels_);
    const LatentMap latent = LatentMap::from_free(params, n_levels_);
    Eigen::VectorXd phi(n_phi_);
    for (int k = 0; k < n_phi_; ++k) phi[k] = std::exp(params[n_free + k]);
    if (!phi.allFinite() || !(phi.array() > 0.0).all()) return false;
    try {
      Eigen::VectorXd g;
      *cost = neg_log_likelihood(design_, latent, phi, D_, nugget_, gradient ? &g : nullptr);
      if (gradient) {
        if (!g.allFinite()) return false;
        for (int k = 0; k < NumParameters(); ++k) gradient[k] = g[k];
      }
      return std::isfinite(*cost);
    } catch (const Error&) {
      return false;
    }
  }

  int NumParameters() const override { return LatentMap::free_count(n_levels_) + n_phi_; }

 private:
  const Design& design_;
  const Eigen::MatrixXd& D_;
  int n_levels_;
  int n_phi_;
  double nugget_;
};

struct StartResult {
  bool ok = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> params;
};

}  // namespace

MrLvgpModel fit(const Dataset& data, const FitOptions& options, FitReport* report) {
  data.validate();
  if (options.starts < 1) throw Error(ErrorKind::InvalidInput, "at least one start is required");

  // The scaffold model supplies the scaled design and standardized responses.
  const int l = data.n_levels;
  const auto n_phi = static_cast<int>(data.X.cols());
  const int n_free = LatentMap::free_count(l);
  const int n_params = n_free + n_phi;

  // Draw every start up front from one stream so results do not depend on threading.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> latent_dist(-options.latent_init, options.latent_init);
  std::uniform_real_distribution<double> phi_dist(options.log_phi_lo, options.log_phi_hi);
  std::vector<std::vector<double>> starts(static_cast<std::size_t>(options.starts));
  for (auto& s : starts) {
    s.resize(static_cast<std::size_t>(n_params));
    for (int k = 0; k < n_free; ++k) s[k] = latent_dist(rng);
    for (int k = 0; k < n_phi; ++k) s[n_free + k] = phi_dist(rng);
  }

  // Scaling and standardization do not depend on the hyperparameters.
  MrLvgpModel scaffold;
  {
    LatentMap unit{Eigen::MatrixXd::Zero(l, kLatentDim)};
    for (int t = 0; t < l; ++t) unit.Z(t, 0) = 10.0 * t;  // well separated: R stays definite
    scaffold = MrLvgpModel::build(data, unit, Eigen::VectorXd::Constant(n_phi, 1.0),
                                  options.nugget, options.seed);
  }
  const Design& design = scaffold.design();
  const Eigen::MatrixXd& D = scaffold.standardized_responses();

  std::vector<StartResult> results(starts.size());
  auto run = [&](std::size_t k) {
    StartResult& res = results[k];
    res.params = starts[k];
    ceres::GradientProblem problem(new ProfileLikelihood(design, D, l, n_phi, options.nugget));
    ceres::GradientProblemSolver::Options opts;
    opts.line_search_direction_type = ceres::LBFGS;
    opts.max_num_iterations = options.max_iterations;
    opts.function_tolerance = 1e-11;
    opts.gradient_tolerance = 1e-9;
    opts.parameter_tolerance = 1e-10;
    opts.logging_type = ceres::SILENT;
    opts.minimizer_progress_to_stdout = false;
    ceres::GradientProblemSolver::Summary summary;
    double initial = 0.0;
    if (!problem.Evaluate(res.params.data(), &initial, nullptr)) return;
    ceres::Solve(opts, problem, res.params.data(), &summary);
    double final_cost = 0.0;
    if (problem.Evaluate(res.params.data(), &final_cost, nullptr) && std::isfinite(final_cost)) {
      res.ok = true;
      res.objective = final_cost;
    }
  };

  const auto n_starts = static_cast<std::ptrdiff_t>(starts.size());
  if (options.exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t k = 0; k < n_starts; ++k) run(static_cast<std::size_t>(k));
  } else {
    for (std::ptrdiff_t k = 0; k < n_starts; ++k) run(static_cast<std::size_t>(k));
  }

  int best = -1;
  for (std::size_t k = 0; k < results.size(); ++k)
    if (results[k].ok && (best < 0 || results[k].objective < results[best].objective))
      best = static_cast<int>(k);
  if (report) {
    report->start_objectives.clear();
    report->successful_starts = 0;
    for (const auto& r : results) {
      report->start_objectives.push_back(r.objective);
      report->successful_starts += r.ok ? 1 : 0;
    }
    report->best_start = best;
  }
  if (best < 0) throw Error(ErrorKind::FitFailure, "every likelihood start failed to factorize");

  const auto& p = results[static_cast<std::size_t>(best)].params;
  LatentMap latent = LatentMap::from_free(p.data(), l).anchored();
  Eigen::VectorXd phi(n_phi);
  for (int k = 0; k < n_phi; ++k) phi[k] = std::exp(p[n_free + k]);
  MrLvgpModel model = MrLvgpModel::build(data, std::move(latent), std::move(phi), options.nugget,
                                         options.seed);
  if (report) report->best_objective = model.objective();
  return model;
}

}  // namespace mctopo::gp
