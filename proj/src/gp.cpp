#include "mctopo/gp.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "mctopo/error.hpp"
#include "mctopo/kernels.hpp"

namespace mctopo::gp {

void Dataset::validate() const {
  const auto n = X.rows();
  if (n < 2) throw Error(ErrorKind::InvalidInput, "dataset needs at least two rows");
  if (static_cast<Eigen::Index>(levels.size()) != n || Y.rows() != n)
    throw Error(ErrorKind::InvalidInput, "dataset row counts disagree");
  if (X.cols() < 1 || Y.cols() < 1)
    throw Error(ErrorKind::InvalidInput, "dataset needs quantitative inputs and responses");
  if (n_levels < 1) throw Error(ErrorKind::InvalidInput, "dataset needs at least one level");
  for (int t : levels)
    if (t < 1 || t > n_levels) throw Error(ErrorKind::InvalidInput, "level index out of range");
  if (!X.allFinite() || !Y.allFinite()) throw Error(ErrorKind::InvalidInput, "non-finite dataset entry");
}

Dataset Dataset::subset(std::span<const int> rows) const {
  Dataset out;
  out.n_levels = n_levels;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()), Y.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
    out.Y.row(static_cast<Eigen::Index>(k)) = Y.row(rows[k]);
    out.levels.push_back(levels[static_cast<std::size_t>(rows[k])]);
  }
  return out;
}

Dataset dataset_from_rows(std::span<const homog::DatasetRow> rows, int n_levels) {
  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.X.resize(n, 1);
  d.Y.resize(n, 4);
  int max_level = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.X(i, 0) = r.vf;
    d.Y.row(i) = r.Y.vec().transpose();
    d.levels.push_back(r.class_id);
    max_level = std::max(max_level, r.class_id);
  }
  d.n_levels = n_levels > 0 ? n_levels : max_level;
  return d;
}

LatentMap LatentMap::from_free(const double* params, int n_levels) {
  LatentMap m{Eigen::MatrixXd::Zero(n_levels, kLatentDim)};
  if (n_levels >= 2) {
    m.Z(1, 0) = params[0];
    for (int l = 2; l < n_levels; ++l) {
      m.Z(l, 0) = params[1 + 2 * (l - 2)];
      m.Z(l, 1) = params[2 + 2 * (l - 2)];
    }
  }
  return m;
}

void LatentMap::to_free(double* params) const {
  const int l = n_levels();
  if (l < 2) return;
  params[0] = Z(1, 0);
  for (int k = 2; k < l; ++k) {
    params[1 + 2 * (k - 2)] = Z(k, 0);
    params[2 + 2 * (k - 2)] = Z(k, 1);
  }
}

LatentMap LatentMap::anchored() const {
  LatentMap out{Z};
  if (n_levels() == 0) return out;
  const Eigen::RowVector2d origin = Z.row(0);
  for (int l = 0; l < n_levels(); ++l) out.Z.row(l) -= origin;
  if (n_levels() >= 2) {
    const double angle = std::atan2(out.Z(1, 1), out.Z(1, 0));
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix2d rot;
    rot << c, s, -s, c;
    for (int l = 1; l < n_levels(); ++l) out.Z.row(l) = (rot * out.Z.row(l).transpose()).transpose();
    out.Z(1, 1) = 0.0;
    if (out.Z(1, 0) < 0.0) out.Z.col(0) *= -1.0;
  }
  out.Z.row(0).setZero();
  return out;
}

double correlation(const Eigen::Ref<const Eigen::VectorXd>& x, const Vector2d& z,
                   const Eigen::Ref<const Eigen::VectorXd>& xp, const Vector2d& zp,
                   const Eigen::Ref<const Eigen::VectorXd>& phi) {
  const Eigen::VectorXd dx = x - xp;
  return std::exp(-(dx.cwiseProduct(dx).dot(phi) + (z - zp).squaredNorm()));
}

namespace {

Eigen::MatrixXd latent_rows(const Design& design, const LatentMap& latent) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(design.levels.size()), kLatentDim);
  for (std::size_t i = 0; i < design.levels.size(); ++i)
    Z.row(static_cast<Eigen::Index>(i)) = latent.Z.row(design.levels[i] - 1);
  return Z;
}

// Numerically positive definite: Cholesky succeeded and no pivot collapsed.
bool well_conditioned(const Eigen::LLT<Eigen::MatrixXd>& chol, Eigen::Index n) {
  if (chol.info() != Eigen::Success) return false;
  const Eigen::VectorXd diag = chol.matrixLLT().diagonal();
  if (!diag.allFinite()) return false;
  const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  return diag.cwiseAbs2().minCoeff() > floor;
}

}  // namespace

Eigen::MatrixXd correlation_matrix(const Design& design, const LatentMap& latent,
                                   const Eigen::VectorXd& phi, double nugget, Execution exec) {
  Eigen::MatrixXd R;
  const Eigen::MatrixXd Z = latent_rows(design, latent);
  if (exec == Execution::Parallel)
    kernels::correlation_matrix(design.Xs, Z, phi, nugget, R);
  else
    kernels::serial::correlation_matrix(design.Xs, Z, phi, nugget, R);
  return R;
}

Profile profile(const Design& design, const LatentMap& latent, const Eigen::VectorXd& phi,
                const Eigen::MatrixXd& D, double nugget) {
  const Eigen::Index n = D.rows();
  const auto m = static_cast<double>(D.cols());
  Profile p;
  p.chol.compute(correlation_matrix(design, latent, phi, nugget));
  if (!well_conditioned(p.chol, n))
    throw Error(ErrorKind::IllConditionedData,
                "correlation matrix is not positive definite (duplicate inputs?)");
  p.log_det_R = 2.0 * p.chol.matrixLLT().diagonal().array().log().sum();

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd rinv_h = p.chol.solve(ones);
  const Eigen::MatrixXd rinv_d = p.chol.solve(D);
  // Constant regression basis: (H^T R^-1 H)^-1 H^T R^-1 D.
  p.Bhat = (ones.transpose() * rinv_d) / ones.dot(rinv_h);
  const Eigen::MatrixXd resid = D.rowwise() - p.Bhat;
  p.alpha = p.chol.solve(resid);
  p.SigmaHat = (resid.transpose() * p.alpha) / static_cast<double>(n);
  p.SigmaHat = 0.5 * (p.SigmaHat + p.SigmaHat.transpose());

  Eigen::LLT<Eigen::MatrixXd> sigma_chol(p.SigmaHat);
  if (sigma_chol.info() != Eigen::Success)
    throw Error(ErrorKind::IllConditionedData, "response covariance is singular");
  const double log_det_sigma = 2.0 * sigma_chol.matrixLLT().diagonal().array().log().sum();
  p.objective = static_cast<double>(n) * log_det_sigma + m * p.log_det_R;
  if (!std::isfinite(p.objective))
    throw Error(ErrorKind::IllConditionedData, "non-finite likelihood");
  return p;
}

double neg_log_likelihood(const Design& design, const LatentMap& latent,
                          const Eigen::VectorXd& phi, const Eigen::MatrixXd& D, double nugget,
                          Eigen::VectorXd* grad) {
  const Profile p = profile(design, latent, phi, D, nugget);
  if (!grad) return p.objective;

  const Eigen::Index n = D.rows();
  const int l = latent.n_levels();
  const int n_free = LatentMap::free_count(l);
  const auto n_phi = static_cast<int>(phi.size());
  grad->setZero(n_free + n_phi);

  // d objective = tr[(m R^-1 - alpha Sigma^-1 alpha^T) dR]; since B and Sigma are at
  // their profile optimum only the explicit R dependence contributes.
  const Eigen::MatrixXd rinv = p.chol.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd sa = p.SigmaHat.llt().solve(p.alpha.transpose());  // m x n
  Eigen::MatrixXd M = static_cast<double>(D.cols()) * rinv - p.alpha * sa;
  const Eigen::MatrixXd R = correlation_matrix(design, latent, phi, 0.0);
  M.array() *= R.array();
  M.diagonal().setZero();  // dR_ii = 0

  const Eigen::MatrixXd Z = latent_rows(design, latent);
  // Latent: dR_ij/dz_{t,d} = -2 (z_i - z_j)_d R_ij ([t_i = t] - [t_j = t]).
  Eigen::MatrixXd gz = Eigen::MatrixXd::Zero(l, kLatentDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int ti = design.levels[static_cast<std::size_t>(i)] - 1;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double g = M(i, j);
      if (g == 0.0) continue;
      for (int d = 0; d < kLatentDim; ++d) gz(ti, d) += -4.0 * g * (Z(i, d) - Z(j, d));
    }
  }
  if (l >= 2) {
    (*grad)[0] = gz(1, 0);
    for (int t = 2; t < l; ++t) {
      (*grad)[1 + 2 * (t - 2)] = gz(t, 0);
      (*grad)[2 + 2 * (t - 2)] = gz(t, 1);
    }
  }
  // log phi: dR_ij/dlog(phi_k) = -phi_k (x_ik - x_jk)^2 R_ij.
  for (int k = 0; k < n_phi; ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double d = design.Xs(i, k) - design.Xs(j, k);
        s += M(i, j) * d * d;
      }
    (*grad)[n_free + k] = -phi[k] * s;
  }
  return p.objective;
}

namespace single_response {

namespace {

Eigen::MatrixXd build_r(const Design& design, const LatentMap& latent, const Eigen::VectorXd& phi,
                        double nugget) {
  const auto n = static_cast<Eigen::Index>(design.levels.size());
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      R(i, j) = correlation(design.Xs.row(i).transpose(), latent.point(design.levels[i]),
                            design.Xs.row(j).transpose(), latent.point(design.levels[j]), phi) +
                (i == j ? nugget : 0.0);
  return R;
}

}  // namespace

double neg_log_likelihood(const Design& design, const LatentMap& latent,
                          const Eigen::VectorXd& phi, const Eigen::VectorXd& y, double nugget) {
  const Eigen::MatrixXd R = build_r(design, latent, phi, nugget);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    throw Error(ErrorKind::IllConditionedData, "correlation matrix is not positive definite");
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(y.size());
  const double beta = one.dot(ldlt.solve(y)) / one.dot(ldlt.solve(one));
  const Eigen::VectorXd e = y - beta * one;
  const double sigma2 = e.dot(ldlt.solve(e)) / static_cast<double>(y.size());
  const double log_det = ldlt.vectorD().array().log().sum();
  return static_cast<double>(y.size()) * std::log(sigma2) + log_det;
}

double predict(const Design& design, const LatentMap& latent, const Eigen::VectorXd& phi,
               const Eigen::VectorXd& y, double nugget, const Eigen::VectorXd& xs,
               const Vector2d& z) {
  const Eigen::MatrixXd R = build_r(design, latent, phi, nugget);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(R);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(y.size());
  const double beta = one.dot(ldlt.solve(y)) / one.dot(ldlt.solve(one));
  Eigen::VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    r[i] = correlation(xs, z, design.Xs.row(i).transpose(), latent.point(design.levels[i]), phi);
  return beta + r.dot(ldlt.solve(y - beta * one));
}

}  // namespace single_response

MrLvgpModel MrLvgpModel::build(Dataset data, LatentMap latent, Eigen::VectorXd phi, double nugget,
                               std::uint64_t seed) {
  data.validate();
  if (latent.n_levels() != data.n_levels || latent.Z.cols() != kLatentDim)
    throw Error(ErrorKind::InvalidInput, "latent map does not match the level count");
  if (phi.size() != data.X.cols() || !(phi.array() > 0.0).all())
    throw Error(ErrorKind::InvalidInput, "phi must be positive, one per quantitative input");
  if (!(nugget >= 0.0)) throw Error(ErrorKind::InvalidInput, "nugget must be non-negative");

  MrLvgpModel m;
  m.nugget_ = nugget;
  m.seed_ = seed;
  m.x_lo_ = data.X.colwise().minCoeff().transpose();
  m.x_span_ = (data.X.colwise().maxCoeff().transpose() - m.x_lo_);
  for (Eigen::Index k = 0; k < m.x_span_.size(); ++k)
    if (!(m.x_span_[k] > 0.0)) m.x_span_[k] = 1.0;

  const auto n = static_cast<double>(data.size());
  m.y_mean_ = data.Y.colwise().mean();
  m.y_scale_ =
      ((data.Y.rowwise() - m.y_mean_).array().square().colwise().sum() / (n - 1.0)).sqrt();
  for (Eigen::Index k = 0; k < m.y_scale_.size(); ++k)
    if (!(m.y_scale_[k] > 0.0)) m.y_scale_[k] = 1.0;

  m.design_.levels = data.levels;
  m.design_.Xs.resize(data.X.rows(), data.X.cols());
  for (Eigen::Index i = 0; i < data.X.rows(); ++i)
    m.design_.Xs.row(i) = m.scale_input(data.X.row(i).transpose()).transpose();
  m.D_ = (data.Y.rowwise() - m.y_mean_).array().rowwise() / m.y_scale_.array();

  m.latent_ = std::move(latent);
  m.phi_ = std::move(phi);
  m.profile_ = profile(m.design_, m.latent_, m.phi_, m.D_, nugget);
  // Smooth fits leave R close to singular and alpha large, so a double-precision
  // r^T alpha loses the training responses to cancellation. Refine alpha against an
  // extended-precision residual and predict in extended precision as well.
  {
    const Eigen::Index nn = m.D_.rows(), mm = m.D_.cols();
    MatrixXld R(nn, nn), rhs(nn, mm);
    VectorXld r;
    for (Eigen::Index i = 0; i < nn; ++i) {
      m.correlations_ld(m.design_.Xs.row(i).transpose(),
                        m.latent_.point(m.design_.levels[static_cast<std::size_t>(i)]), r, nullptr, nullptr);
      R.row(i) = r.transpose();
      for (Eigen::Index k = 0; k < mm; ++k)
        rhs(i, k) = static_cast<long double>(m.D_(i, k)) - static_cast<long double>(m.profile_.Bhat[k]);
    }
    m.alpha_ld_ = m.profile_.alpha.cast<long double>();
    for (int sweep = 0; sweep < 4; ++sweep) {
      const MatrixXld res = rhs - R * m.alpha_ld_;
      m.alpha_ld_ += m.profile_.chol.solve(res.cast<double>()).cast<long double>();
    }
  }
  m.data_ = std::move(data);
  return m;
}

Eigen::VectorXd MrLvgpModel::scale_input(const Eigen::Ref<const Eigen::VectorXd>& x_raw) const {
  return (x_raw - x_lo_).cwiseQuotient(x_span_);
}

void MrLvgpModel::correlations_ld(const Eigen::Ref<const Eigen::VectorXd>& xs, const Vector2d& z,
                                  VectorXld& r, MatrixXld* dr_dx, MatrixXld* dr_dz) const {
  const Eigen::Index n = design_.Xs.rows();
  const Eigen::Index p = xs.size();
  r.resize(n);
  if (dr_dx) dr_dx->resize(n, p);
  if (dr_dz) dr_dz->resize(n, kLatentDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector2d zi = latent_.point(design_.levels[static_cast<std::size_t>(i)]);
    long double s = 0.0L;
    bool same = true;
    for (Eigen::Index k = 0; k < p; ++k) {
      const long double d = static_cast<long double>(xs[k]) - design_.Xs(i, k);
      s += static_cast<long double>(phi_[k]) * d * d;
      same = same && xs[k] == design_.Xs(i, k);
    }
    const long double d1 = static_cast<long double>(z[0]) - zi[0], d2 = static_cast<long double>(z[1]) - zi[1];
    same = same && z == zi;
    const long double ri = std::exp(-(s + d1 * d1 + d2 * d2));
    // The nugget belongs to the correlation at coincident inputs, so training
    // responses are reproduced exactly.
    r[i] = ri + (same ? static_cast<long double>(nugget_) : 0.0L);
    if (dr_dx)
      for (Eigen::Index k = 0; k < p; ++k)
        (*dr_dx)(i, k) = -2.0L * ri * static_cast<long double>(phi_[k]) *
                         (static_cast<long double>(xs[k]) - design_.Xs(i, k));
    if (dr_dz) {
      (*dr_dz)(i, 0) = -2.0L * ri * d1;
      (*dr_dz)(i, 1) = -2.0L * ri * d2;
    }
  }
}

Eigen::VectorXd MrLvgpModel::predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& xs,
                                                  const Vector2d& z) const {
  VectorXld r;
  correlations_ld(xs, z, r, nullptr, nullptr);
  const VectorXld ys = profile_.Bhat.transpose().cast<long double>() + alpha_ld_.transpose() * r;
  return ys.cast<double>();
}

Eigen::VectorXd MrLvgpModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x_raw,
                                     const Vector2d& z) const {
  const Eigen::VectorXd ys = predict_standardized(scale_input(x_raw), z);
  return y_mean_.transpose() + ys.cwiseProduct(y_scale_.transpose());
}

Prediction MrLvgpModel::predict_grad(const Eigen::Ref<const Eigen::VectorXd>& x_raw,
                                     const Vector2d& z) const {
  const Eigen::VectorXd xs = scale_input(x_raw);
  VectorXld r;
  MatrixXld dr_dx, dr_dz;
  correlations_ld(xs, z, r, &dr_dx, &dr_dz);
  const Eigen::VectorXd ys = (profile_.Bhat.transpose().cast<long double>() + alpha_ld_.transpose() * r).cast<double>();
  const Eigen::VectorXd scale = y_scale_.transpose();
  Prediction out;
  out.y = y_mean_.transpose() + ys.cwiseProduct(scale);
  out.d_dx = (alpha_ld_.transpose() * dr_dx).cast<double>().array().colwise() * scale.array();
  out.d_dx = out.d_dx.array().rowwise() / x_span_.transpose().array();
  out.d_dz = (alpha_ld_.transpose() * dr_dz).cast<double>().array().colwise() * scale.array();
  return out;
}

StiffnessVec MrLvgpModel::predict_stiffness(double rho, const Vector2d& z) const {
  Eigen::VectorXd x(1);
  x[0] = rho;
  const Eigen::VectorXd y = predict(x, z);
  if (y.size() != 4) throw Error(ErrorKind::InvalidInput, "model does not have four responses");
  return StiffnessVec::from(y.head<4>());
}

std::vector<LatentRow> export_latent(const MrLvgpModel& model) {
  std::vector<LatentRow> rows;
  for (int l = 1; l <= model.n_levels(); ++l) {
    const Vector2d z = model.anchor(l);
    rows.push_back({l, z[0], z[1]});
  }
  return rows;
}

}  // namespace mctopo::gp
