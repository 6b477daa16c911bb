#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mctopo/exec.hpp"
#include "mctopo/fea.hpp"
#include "mctopo/filter.hpp"
#include "mctopo/gp.hpp"
#include "mctopo/kernels.hpp"
#include "mctopo/mma.hpp"
#include "mctopo/penalty.hpp"

// Data-driven multiscale compliance minimization. Each active macro element carries
// (rho, z1, z2); its stiffness is f(z) * k(Y(rho, z)) with Y from the surrogate and f
// the class penalty.
namespace mctopo::topopt {

struct TopOptSettings {
  double vmax = 0.6;
  double rho_min = 0.1, rho_max = 0.95;
  double r_min = 1.5;
  double tol = 0.01;
  int max_iter = 200;
  double z_margin = 0.1;  // latent box = anchor bounding box grown by this fraction per side
  bool filter_latent = true;
  bool volume_on_filtered = false;
  double lambda = penalty::kDefaultLambda;
  std::optional<double> gamma;
  /// Predicted C11, C22, C66 are floored at this fraction of their largest training
  /// value, and |C12| kept below sqrt(C11 C22), before building element matrices.
  double stiffness_floor = 1e-6;
  mma::MmaSettings mma;
  Execution exec = Execution::Parallel;

  void validate() const;
};

/// Surrogate output made admissible for the FE model, with its Jacobian
/// d(projected) / d(raw). Inside the admissible set the map is the identity.
struct ProjectedStiffness {
  StiffnessVec Y;
  Eigen::Matrix4d J;
  bool clipped;
};
ProjectedStiffness project_stiffness(const StiffnessVec& raw, const StiffnessVec& floor);

class TopOptProblem {
 public:
  TopOptProblem(fea::MacroMesh mesh, std::vector<fea::LoadCase> loads, const gp::MrLvgpModel& model,
                TopOptSettings settings = {});

  const fea::MacroMesh& mesh() const { return mesh_; }
  const std::vector<fea::LoadCase>& loads() const { return analyzer_.loads(); }
  const TopOptSettings& settings() const { return s_; }
  const gp::MrLvgpModel& model() const { return *model_; }
  const penalty::PenaltyParams& penalty() const { return penalty_; }
  const ConeFilter& filter() const { return filter_; }
  const std::vector<int>& active() const { return active_; }
  const std::vector<kernels::ElementDofs>& element_dofs() const { return edofs_; }
  int n_active() const { return static_cast<int>(active_.size()); }
  int n_classes() const { return static_cast<int>(penalty_.anchors.size()); }
  const Eigen::Vector2d& anchor(int class_id) const { return penalty_.anchors.at(static_cast<std::size_t>(class_id - 1)); }
  const Eigen::Vector2d& z_lo() const { return z_lo_; }
  const Eigen::Vector2d& z_hi() const { return z_hi_; }
  const StiffnessVec& stiffness_floor() const { return floor_; }

  fea::Analysis analyze(std::span<const fea::Matrix8d> ke) { return analyzer_.run(ke, s_.exec); }

 private:
  fea::MacroMesh mesh_;
  TopOptSettings s_;
  const gp::MrLvgpModel* model_;
  penalty::PenaltyParams penalty_;
  ConeFilter filter_;
  fea::Analyzer analyzer_;
  std::vector<int> active_;
  std::vector<kernels::ElementDofs> edofs_;
  Eigen::Vector2d z_lo_, z_hi_;
  StiffnessVec floor_;
};

/// Per active element (in mesh.active_elements() order).
struct DesignField {
  Eigen::VectorXd rho, z1, z2;        // design variables
  Eigen::VectorXd rho_f, z1_f, z2_f;  // physical fields after filtering
  std::vector<int> cls;               // snapped class ids once z is frozen
  bool z_frozen = false;
};

/// Recomputes the physical fields from the design variables. Frozen latent fields
/// are used unfiltered so they stay exactly on their anchors.
void update_physical(const TopOptProblem& p, DesignField& field);

/// rho = vmax everywhere, z at the anchor of `class_id`.
DesignField initial_design(const TopOptProblem& p, int class_id = 1);

double volume(const TopOptProblem& p, const DesignField& field);

struct Evaluation {
  fea::Analysis analysis;
  double c = 0.0;  // mean compliance over load cases
  kernels::PredictBatch pred;
  std::vector<StiffnessVec> Y;        // after projection
  std::vector<Eigen::Matrix4d> J;     // projection Jacobians
  int clipped = 0;                    // elements whose prediction was projected
  Eigen::VectorXd f;       // penalty per element
  Eigen::MatrixXd df;      // n x 2 penalty gradient
  std::vector<fea::Matrix8d> ke;  // penalized element matrices
  Eigen::MatrixXd q;       // n x 4, load-averaged u_e^T K_i u_e
  Eigen::VectorXd energy;  // load-averaged u_e^T ke u_e
};

Evaluation evaluate_design(TopOptProblem& p, const DesignField& field);

struct Sensitivities {
  Eigen::VectorXd dc_drho, dc_dz1, dc_dz2;  // w.r.t. design variables
  Eigen::VectorXd dV_drho;
};

Sensitivities sensitivities(const TopOptProblem& p, const DesignField& field, const Evaluation& ev);

struct TraceRow {
  int iter;
  double c;
  double volume;
  double step;
  int clipped;
};

struct StageResult {
  std::string stage;
  DesignField field;
  std::vector<TraceRow> trace;
  double c_initial = 0.0;
  double c_final = 0.0;
  double volume_final = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Joint (rho, z) optimization from the uniform class-1 design.
StageResult stage1(TopOptProblem& p);
/// Snaps every element to its nearest anchor and re-optimizes rho with z frozen.
StageResult stage2(TopOptProblem& p, const DesignField& stage1_field);
/// rho-only optimization with every element fixed to `class_id`.
StageResult run_single_class(TopOptProblem& p, int class_id = 1);

/// argmin_t |z - z_t|; ties go to the lowest class id.
int nearest_class(const std::vector<Eigen::Vector2d>& anchors, const Eigen::Vector2d& z);

/// Percentage of active elements per class id 1..n_classes.
std::vector<double> class_usage(const DesignField& field, int n_classes);

struct AssembledStructure {
  int width = 0, height = 0;                // pixels; rows top to bottom
  std::vector<std::uint8_t> solid;
  double active_solid_fraction = 0.0;       // solid pixels / (active elements * res^2)
  double design_volume = 0.0;               // mean element vf used for the tiles
  std::vector<std::string> warnings;
};

/// Tiles each active element with its class rasterized at its physical rho;
/// passive elements are void.
AssembledStructure assemble_structure(const fea::MacroMesh& mesh, std::span<const int> cls,
                                      std::span<const double> rho, int resolution = 100);
AssembledStructure assemble_structure(const TopOptProblem& p, const DesignField& field, int resolution = 100);

}  // namespace mctopo::topopt
