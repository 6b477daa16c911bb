#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mctopo/exec.hpp"
#include "mctopo/homog.hpp"
#include "mctopo/stiffness.hpp"

// Multi-response latent-variable Gaussian process over one block of quantitative
// inputs and a single qualitative variable whose levels are embedded in a 2-D
// latent space. Constant mean, separable covariance Sigma (x) R.
namespace mctopo::gp {

inline constexpr int kLatentDim = 2;
inline constexpr double kDefaultNugget = 1e-5;

using Vector2d = Eigen::Vector2d;
using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Training data in raw units. Levels are 1-based.
struct Dataset {
  Eigen::MatrixXd X;  // n x p
  std::vector<int> levels;
  int n_levels = 0;
  Eigen::MatrixXd Y;  // n x m

  int size() const { return static_cast<int>(X.rows()); }
  void validate() const;
  Dataset subset(std::span<const int> rows) const;
};

/// Quantitative input = vf, qualitative level = class id, responses = [C11 C12 C22 C66].
Dataset dataset_from_rows(std::span<const homog::DatasetRow> rows, int n_levels = 0);

/// Latent coordinates per level. The free parameterization pins level 1 at the origin
/// and level 2 on the z1 axis, leaving 2l - 3 scalars.
struct LatentMap {
  Eigen::MatrixXd Z;  // l x 2

  int n_levels() const { return static_cast<int>(Z.rows()); }
  Vector2d point(int level) const { return Z.row(level - 1).transpose(); }

  static int free_count(int n_levels) { return n_levels <= 1 ? 0 : 2 * n_levels - 3; }
  static LatentMap from_free(const double* params, int n_levels);
  void to_free(double* params) const;
  /// Rigid motion (translation, rotation, reflection) into the anchored form:
  /// level 1 at (0,0), level 2 at (a,0) with a >= 0.
  LatentMap anchored() const;
};

/// Gaussian correlation exp{-(x-x')^T diag(phi) (x-x') - |z-z'|^2}.
double correlation(const Eigen::Ref<const Eigen::VectorXd>& x, const Vector2d& z,
                   const Eigen::Ref<const Eigen::VectorXd>& xp, const Vector2d& zp,
                   const Eigen::Ref<const Eigen::VectorXd>& phi);

/// Training-side inputs after scaling; `Xs` rows are quantitative inputs in [0,1].
struct Design {
  Eigen::MatrixXd Xs;
  std::vector<int> levels;
};

/// n x n correlation with `nugget` added to the diagonal.
Eigen::MatrixXd correlation_matrix(const Design& design, const LatentMap& latent,
                                   const Eigen::VectorXd& phi, double nugget,
                                   Execution exec = Execution::Parallel);

/// Profiled quantities at fixed (Z, phi).
struct Profile {
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::RowVectorXd Bhat;   // 1 x m (constant mean)
  Eigen::MatrixXd SigmaHat;  // m x m
  Eigen::MatrixXd alpha;     // R^{-1}(D - H Bhat), n x m
  double log_det_R = 0.0;
  double objective = 0.0;    // n ln|SigmaHat| + m ln|R|
};

/// Throws IllConditionedData when R (with nugget) is not numerically positive definite.
Profile profile(const Design& design, const LatentMap& latent, const Eigen::VectorXd& phi,
                const Eigen::MatrixXd& D, double nugget);

/// n ln|SigmaHat| + m ln|R|. With `grad`, also fills the gradient with respect to
/// [free latent parameters..., log phi...].
double neg_log_likelihood(const Design& design, const LatentMap& latent,
                          const Eigen::VectorXd& phi, const Eigen::MatrixXd& D, double nugget,
                          Eigen::VectorXd* grad = nullptr);

/// Single-response formulas (scalar beta, sigma^2). Independent code path used to
/// cross-check the multi-response implementation when m = 1.
namespace single_response {
double neg_log_likelihood(const Design& design, const LatentMap& latent,
                          const Eigen::VectorXd& phi, const Eigen::VectorXd& y, double nugget);
double predict(const Design& design, const LatentMap& latent, const Eigen::VectorXd& phi,
               const Eigen::VectorXd& y, double nugget, const Eigen::VectorXd& xs,
               const Vector2d& z);
}  // namespace single_response

struct Prediction {
  Eigen::VectorXd y;     // m
  Eigen::MatrixXd d_dx;  // m x p, raw quantitative units
  Eigen::MatrixXd d_dz;  // m x 2
};

class MrLvgpModel {
 public:
  /// Builds the fitted model at given hyperparameters: standardizes, factorizes,
  /// profiles Bhat / SigmaHat and caches R^{-1}(D - H Bhat).
  static MrLvgpModel build(Dataset data, LatentMap latent, Eigen::VectorXd phi,
                           double nugget = kDefaultNugget, std::uint64_t seed = 0);

  int n_levels() const { return data_.n_levels; }
  int n_inputs() const { return static_cast<int>(phi_.size()); }
  int n_responses() const { return static_cast<int>(data_.Y.cols()); }
  int n_train() const { return data_.size(); }

  const Dataset& data() const { return data_; }
  const LatentMap& latent() const { return latent_; }
  Vector2d anchor(int level) const { return latent_.point(level); }
  const Eigen::VectorXd& phi() const { return phi_; }
  const Eigen::RowVectorXd& Bhat() const { return profile_.Bhat; }
  const Eigen::MatrixXd& SigmaHat() const { return profile_.SigmaHat; }
  const Eigen::MatrixXd& alpha() const { return profile_.alpha; }
  const Eigen::LLT<Eigen::MatrixXd>& chol() const { return profile_.chol; }
  double objective() const { return profile_.objective; }
  double nugget() const { return nugget_; }
  std::uint64_t seed() const { return seed_; }
  const Design& design() const { return design_; }
  const Eigen::MatrixXd& standardized_responses() const { return D_; }

  const Eigen::VectorXd& x_lo() const { return x_lo_; }
  const Eigen::VectorXd& x_span() const { return x_span_; }
  const Eigen::RowVectorXd& y_mean() const { return y_mean_; }
  const Eigen::RowVectorXd& y_scale() const { return y_scale_; }

  Eigen::VectorXd scale_input(const Eigen::Ref<const Eigen::VectorXd>& x_raw) const;

  /// Raw-unit prediction at a free latent point (need not coincide with a level).
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x_raw, const Vector2d& z) const;
  Prediction predict_grad(const Eigen::Ref<const Eigen::VectorXd>& x_raw, const Vector2d& z) const;
  /// Standardized-scale prediction from a scaled input; what predict() de-standardizes.
  Eigen::VectorXd predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                       const Vector2d& z) const;

  StiffnessVec predict_stiffness(double rho, const Vector2d& z) const;

 private:
  void correlations_ld(const Eigen::Ref<const Eigen::VectorXd>& xs, const Vector2d& z, VectorXld& r,
                       MatrixXld* dr_dx, MatrixXld* dr_dz) const;

  Dataset data_;
  LatentMap latent_;
  Eigen::VectorXd phi_;
  double nugget_ = kDefaultNugget;
  std::uint64_t seed_ = 0;
  Eigen::VectorXd x_lo_, x_span_;
  Eigen::RowVectorXd y_mean_, y_scale_;
  Design design_;
  Eigen::MatrixXd D_;
  Profile profile_;
  MatrixXld alpha_ld_;  // refined R^{-1}(D - H Bhat)
};

struct FitOptions {
  int starts = 8;
  std::uint64_t seed = 0;
  double nugget = kDefaultNugget;
  int max_iterations = 400;
  double log_phi_lo = -3.0, log_phi_hi = 3.0;
  double latent_init = 1.0;  // starts uniform in [-latent_init, latent_init]
  Execution exec = Execution::Parallel;
};

struct FitReport {
  int successful_starts = 0;
  int best_start = -1;
  double best_objective = 0.0;
  std::vector<double> start_objectives;  // +inf for failed starts
};

/// Multi-start L-BFGS on the profile likelihood.
MrLvgpModel fit(const Dataset& data, const FitOptions& options = {}, FitReport* report = nullptr);

struct LatentRow {
  int class_id;
  double z1, z2;
};
std::vector<LatentRow> export_latent(const MrLvgpModel& model);

}  // namespace mctopo::gp
