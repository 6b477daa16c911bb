#include "mctopo/topopt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mctopo/error.hpp"
#include "mctopo/microlib.hpp"

namespace mctopo::topopt {

void TopOptSettings::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (!(rho_min > 0.0)) fail("rho_min must be > 0");
  if (!(rho_max > rho_min && rho_max <= 1.0)) fail("need rho_min < rho_max <= 1");
  if (!(vmax > rho_min && vmax < rho_max)) fail("vmax must lie in (rho_min, rho_max)");
  if (!(r_min >= 0.0)) fail("r_min must be >= 0");
  if (!(tol > 0.0)) fail("tol must be > 0");
  if (max_iter < 1) fail("max_iter must be >= 1");
  if (!(z_margin >= 0.0)) fail("z_margin must be >= 0");
  if (!(lambda > 0.0)) fail("lambda must be > 0");
  if (gamma && !(*gamma > 0.0)) fail("gamma must be > 0");
  if (!(stiffness_floor > 0.0 && stiffness_floor < 1.0)) fail("stiffness_floor must be in (0, 1)");
  mma.validate();
}

namespace {

std::vector<Eigen::Vector2d> anchors_of(const gp::MrLvgpModel& model) {
  std::vector<Eigen::Vector2d> a;
  for (int l = 1; l <= model.latent().n_levels(); ++l) a.push_back(model.anchor(l));
  return a;
}

}  // namespace

ProjectedStiffness project_stiffness(const StiffnessVec& raw, const StiffnessVec& floor) {
  constexpr double kRatio = 1.0 - 1e-6;
  ProjectedStiffness out{raw, Eigen::Matrix4d::Identity(), false};
  for (std::size_t i : {0u, 2u, 3u})
    if (raw[i] < floor[i]) {
      out.Y[i] = floor[i];
      out.J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 0.0;
      out.clipped = true;
    }
  const double s = std::sqrt(out.Y[0] * out.Y[2]);
  const double bound = kRatio * s;
  if (std::abs(raw[1]) > bound) {
    const double sign = raw[1] > 0.0 ? 1.0 : -1.0;
    out.Y[1] = sign * bound;
    // C12' = sign * k * sqrt(C11' C22'), chained through the (possibly floored) diagonal.
    out.J.row(1).setZero();
    out.J(1, 0) = sign * kRatio * 0.5 * out.Y[2] / s * out.J(0, 0);
    out.J(1, 2) = sign * kRatio * 0.5 * out.Y[0] / s * out.J(2, 2);
    out.clipped = true;
  }
  return out;
}

TopOptProblem::TopOptProblem(fea::MacroMesh mesh, std::vector<fea::LoadCase> loads, const gp::MrLvgpModel& model,
                             TopOptSettings settings)
    : mesh_(std::move(mesh)),
      s_(settings),
      model_(&model),
      penalty_(penalty::make_penalty(anchors_of(model), settings.lambda, settings.gamma)),
      filter_(mesh_, settings.r_min),
      analyzer_(mesh_, std::move(loads)) {
  s_.validate();
  if (model.n_inputs() != 1 || model.n_responses() != 4)
    throw Error(ErrorKind::InvalidInput, "surrogate must map one quantitative input to [C11 C12 C22 C66]");
  const double lo = model.x_lo()[0], hi = lo + model.x_span()[0];
  if (s_.rho_min < lo - 1e-2 || s_.rho_max > hi + 1e-2) {
    std::ostringstream m;
    m << "rho bounds [" << s_.rho_min << ", " << s_.rho_max << "] extrapolate the surrogate's range [" << lo << ", "
      << hi << "]";
    throw Error(ErrorKind::Config, m.str());
  }
  const Eigen::VectorXd ymax = model.data().Y.cwiseAbs().colwise().maxCoeff().transpose();
  for (std::size_t i = 0; i < 4; ++i) floor_[i] = s_.stiffness_floor * ymax[static_cast<Eigen::Index>(i)];
  active_ = mesh_.active_elements();
  for (int e : active_) edofs_.push_back(mesh_.element_dofs(e));
  Eigen::Vector2d lo_z = penalty_.anchors.front(), hi_z = lo_z;
  for (const auto& a : penalty_.anchors) {
    lo_z = lo_z.cwiseMin(a);
    hi_z = hi_z.cwiseMax(a);
  }
  const Eigen::Vector2d w = hi_z - lo_z;
  for (int d = 0; d < 2; ++d) {
    // a collinear anchor set would give a zero-width box along one axis
    const double span = w[d] > 0.0 ? w[d] : std::max(w[1 - d], 1.0);
    z_lo_[d] = lo_z[d] - s_.z_margin * span;
    z_hi_[d] = hi_z[d] + s_.z_margin * span;
    if (!(z_hi_[d] > z_lo_[d])) {
      z_lo_[d] -= 0.5;
      z_hi_[d] += 0.5;
    }
  }
}

void update_physical(const TopOptProblem& p, DesignField& field) {
  const auto exec = p.settings().exec;
  field.rho_f = p.filter().apply(field.rho, exec);
  if (field.z_frozen || !p.settings().filter_latent) {
    field.z1_f = field.z1;
    field.z2_f = field.z2;
  } else {
    field.z1_f = p.filter().apply(field.z1, exec);
    field.z2_f = p.filter().apply(field.z2, exec);
  }
}

DesignField initial_design(const TopOptProblem& p, int class_id) {
  const int n = p.n_active();
  if (class_id < 1 || class_id > p.n_classes()) throw Error(ErrorKind::InvalidInput, "class id out of range");
  DesignField f;
  f.rho = Eigen::VectorXd::Constant(n, p.settings().vmax);
  f.z1 = Eigen::VectorXd::Constant(n, p.anchor(class_id)[0]);
  f.z2 = Eigen::VectorXd::Constant(n, p.anchor(class_id)[1]);
  update_physical(p, f);
  return f;
}

double volume(const TopOptProblem& p, const DesignField& field) {
  return p.settings().volume_on_filtered ? field.rho_f.mean() : field.rho.mean();
}

Evaluation evaluate_design(TopOptProblem& p, const DesignField& field) {
  const int n = p.n_active();
  const auto exec = p.settings().exec;
  Evaluation ev;
  const auto span_of = [](const Eigen::VectorXd& v) { return std::span<const double>(v.data(), static_cast<std::size_t>(v.size())); };
  if (exec == Execution::Parallel)
    kernels::predict_batch(p.model(), span_of(field.rho_f), span_of(field.z1_f), span_of(field.z2_f), ev.pred);
  else
    kernels::serial::predict_batch(p.model(), span_of(field.rho_f), span_of(field.z1_f), span_of(field.z2_f), ev.pred);

  ev.Y.resize(static_cast<std::size_t>(n));
  ev.J.resize(static_cast<std::size_t>(n));
  ev.f.resize(n);
  ev.df.resize(n, 2);
  ev.ke.resize(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) {
    const ProjectedStiffness ps =
        project_stiffness(StiffnessVec::from(ev.pred.Y.row(e).transpose().head<4>()), p.stiffness_floor());
    const StiffnessVec& Y = ps.Y;
    ev.Y[static_cast<std::size_t>(e)] = Y;
    ev.J[static_cast<std::size_t>(e)] = ps.J;
    if (ps.clipped) ++ev.clipped;
    Eigen::Vector2d g;
    ev.f[e] = penalty::penalty_f_grad({field.z1_f[e], field.z2_f[e]}, p.penalty(), g);
    ev.df.row(e) = g.transpose();
    try {
      ev.ke[static_cast<std::size_t>(e)] = ev.f[e] * fea::element_stiffness(Y);
    } catch (const Error& err) {
      std::ostringstream m;
      m << "element " << p.active()[static_cast<std::size_t>(e)] << " (rho=" << field.rho_f[e] << ", z=("
        << field.z1_f[e] << ", " << field.z2_f[e] << ")): " << err.what();
      throw Error(ErrorKind::InvalidStiffness, m.str());
    }
  }
  ev.analysis = p.analyze(ev.ke);
  ev.c = ev.analysis.mean_compliance();

  ev.q = Eigen::MatrixXd::Zero(n, 4);
  Eigen::MatrixXd ql;
  const double inv_l = 1.0 / static_cast<double>(ev.analysis.U.size());
  for (const auto& U : ev.analysis.U) {
    if (exec == Execution::Parallel)
      kernels::element_energies(p.element_dofs(), U, fea::basis(), ql);
    else
      kernels::serial::element_energies(p.element_dofs(), U, fea::basis(), ql);
    ev.q += inv_l * ql;
  }
  ev.energy.resize(n);
  for (int e = 0; e < n; ++e) ev.energy[e] = ev.f[e] * ev.q.row(e).dot(ev.Y[static_cast<std::size_t>(e)].vec().transpose());
  return ev;
}

Sensitivities sensitivities(const TopOptProblem& p, const DesignField& field, const Evaluation& ev) {
  const int n = p.n_active();
  Eigen::VectorXd g_rho(n), g_z1(n), g_z2(n);
  for (int e = 0; e < n; ++e) {
    const Eigen::RowVector4d dc_dY = -ev.f[e] * ev.q.row(e) * ev.J[static_cast<std::size_t>(e)];
    const double dc_df = -ev.q.row(e).dot(ev.Y[static_cast<std::size_t>(e)].vec().transpose());
    g_rho[e] = dc_dY.dot(ev.pred.dY_drho.row(e).head<4>());
    g_z1[e] = dc_dY.dot(ev.pred.dY_dz1.row(e).head<4>()) + dc_df * ev.df(e, 0);
    g_z2[e] = dc_dY.dot(ev.pred.dY_dz2.row(e).head<4>()) + dc_df * ev.df(e, 1);
  }
  const auto exec = p.settings().exec;
  Sensitivities s;
  s.dc_drho = p.filter().back(g_rho, exec);
  if (field.z_frozen || !p.settings().filter_latent) {
    s.dc_dz1 = g_z1;
    s.dc_dz2 = g_z2;
  } else {
    s.dc_dz1 = p.filter().back(g_z1, exec);
    s.dc_dz2 = p.filter().back(g_z2, exec);
  }
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / n);
  s.dV_drho = p.settings().volume_on_filtered ? p.filter().back(uniform, exec) : uniform;
  return s;
}

namespace {

StageResult optimize(TopOptProblem& p, DesignField field, bool design_z, const std::string& name) {
  const auto& s = p.settings();
  const int n = p.n_active();
  const int nv = design_z ? 3 * n : n;
  Eigen::VectorXd xmin(nv), xmax(nv), x(nv);
  xmin.head(n).setConstant(s.rho_min);
  xmax.head(n).setConstant(s.rho_max);
  x.head(n) = field.rho.cwiseMax(s.rho_min).cwiseMin(s.rho_max);
  if (design_z) {
    xmin.segment(n, n).setConstant(p.z_lo()[0]);
    xmax.segment(n, n).setConstant(p.z_hi()[0]);
    xmin.tail(n).setConstant(p.z_lo()[1]);
    xmax.tail(n).setConstant(p.z_hi()[1]);
    x.segment(n, n) = field.z1.cwiseMax(p.z_lo()[0]).cwiseMin(p.z_hi()[0]);
    x.tail(n) = field.z2.cwiseMax(p.z_lo()[1]).cwiseMin(p.z_hi()[1]);
  }
  const Eigen::VectorXd range = xmax - xmin;
  mma::MmaState opt(xmin, xmax, s.mma);

  auto unpack = [&](const Eigen::VectorXd& v) {
    field.rho = v.head(n);
    if (design_z) {
      field.z1 = v.segment(n, n);
      field.z2 = v.tail(n);
    }
    update_physical(p, field);
  };

  StageResult out;
  out.stage = name;
  double c0 = 0.0;
  for (int it = 1; it <= s.max_iter; ++it) {
    unpack(x);
    Evaluation ev;
    try {
      ev = evaluate_design(p, field);
    } catch (const Error& err) {
      throw Error(err.kind(), name + " iteration " + std::to_string(it) + ": " + err.what());
    }
    const Sensitivities sens = sensitivities(p, field, ev);
    const double V = volume(p, field);
    if (it == 1) {
      c0 = ev.c;
      out.c_initial = ev.c;
    }
    const double scale = c0 > 0.0 ? 1.0 / c0 : 1.0;
    Eigen::VectorXd df0(nv), df1 = Eigen::VectorXd::Zero(nv);
    df0.head(n) = scale * sens.dc_drho;
    if (design_z) {
      df0.segment(n, n) = scale * sens.dc_dz1;
      df0.tail(n) = scale * sens.dc_dz2;
    }
    df1.head(n) = sens.dV_drho / s.vmax;
    Eigen::VectorXd xn;
    try {
      xn = opt.update(x, scale * ev.c, df0, V / s.vmax - 1.0, df1);
    } catch (const Error& err) {
      throw Error(err.kind(), name + " iteration " + std::to_string(it) + ": " + err.what());
    }
    const double step = ((xn - x).cwiseAbs().array() / range.array()).maxCoeff();
    out.trace.push_back({it, ev.c, V, step, ev.clipped});
    x = xn;
    out.iterations = it;
    if (step < s.tol) {
      out.converged = true;
      break;
    }
  }
  unpack(x);
  const Evaluation final_ev = evaluate_design(p, field);
  out.c_final = final_ev.c;
  out.volume_final = volume(p, field);
  out.field = std::move(field);
  return out;
}

}  // namespace

StageResult stage1(TopOptProblem& p) {
  DesignField f = initial_design(p, 1);
  return optimize(p, std::move(f), true, "stage1");
}

int nearest_class(const std::vector<Eigen::Vector2d>& anchors, const Eigen::Vector2d& z) {
  int best = 1;
  double bd = (z - anchors.front()).squaredNorm();
  for (std::size_t t = 1; t < anchors.size(); ++t) {
    const double d = (z - anchors[t]).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(t) + 1;
    }
  }
  return best;
}

StageResult stage2(TopOptProblem& p, const DesignField& stage1_field) {
  DesignField f = stage1_field;
  const int n = p.n_active();
  f.cls.assign(static_cast<std::size_t>(n), 0);
  for (int e = 0; e < n; ++e) {
    const int c = nearest_class(p.penalty().anchors, {stage1_field.z1_f[e], stage1_field.z2_f[e]});
    f.cls[static_cast<std::size_t>(e)] = c;
    f.z1[e] = p.anchor(c)[0];
    f.z2[e] = p.anchor(c)[1];
  }
  f.z_frozen = true;
  update_physical(p, f);
  return optimize(p, std::move(f), false, "stage2");
}

StageResult run_single_class(TopOptProblem& p, int class_id) {
  DesignField f = initial_design(p, class_id);
  f.cls.assign(static_cast<std::size_t>(p.n_active()), class_id);
  f.z_frozen = true;
  update_physical(p, f);
  return optimize(p, std::move(f), false, "single");
}

std::vector<double> class_usage(const DesignField& field, int n_classes) {
  std::vector<double> pct(static_cast<std::size_t>(n_classes), 0.0);
  if (field.cls.empty()) return pct;
  for (int c : field.cls)
    if (c >= 1 && c <= n_classes) pct[static_cast<std::size_t>(c - 1)] += 1.0;
  for (double& v : pct) v *= 100.0 / static_cast<double>(field.cls.size());
  return pct;
}

AssembledStructure assemble_structure(const fea::MacroMesh& mesh, std::span<const int> cls,
                                      std::span<const double> rho, int resolution) {
  const auto act = mesh.active_elements();
  if (cls.size() != act.size() || rho.size() != act.size())
    throw Error(ErrorKind::InvalidInput, "need one class and one rho per active element");
  AssembledStructure out;
  out.width = mesh.nx * resolution;
  out.height = mesh.ny * resolution;
  out.solid.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  std::size_t solid = 0;
  double vol = 0.0;
  for (std::size_t k = 0; k < act.size(); ++k) {
    const int c = cls[k];
    if (c < 1 || c > microlib::kClassCount)
      throw Error(ErrorKind::InvalidInput, "class " + std::to_string(c) + " is not in the library");
    const auto& mc = microlib::micro_class(c);
    double target = rho[k];
    const double lo = microlib::min_volume_fraction(mc, resolution), hi = 0.99;
    if (target < lo || target > hi) {
      const double clamped = std::clamp(target, lo, hi);
      std::ostringstream m;
      m << "element " << act[k] << ": rho " << target << " outside class " << microlib::class_letter(c)
        << "'s feasible range, clamped to " << clamped;
      out.warnings.push_back(m.str());
      target = clamped;
    }
    const auto sol = microlib::solve_thickness(mc, target, resolution);
    const auto grid = microlib::rasterize(mc, sol.thickness, resolution);
    vol += rho[k];
    const int ei = act[k] % mesh.nx, ej = act[k] / mesh.nx;
    for (int b = 0; b < resolution; ++b) {
      const int row = (mesh.ny - 1 - ej) * resolution + (resolution - 1 - b);
      for (int a = 0; a < resolution; ++a) {
        if (!grid.solid(a, b)) continue;
        out.solid[static_cast<std::size_t>(row) * out.width + ei * resolution + a] = 1;
        ++solid;
      }
    }
  }
  if (!act.empty()) {
    out.active_solid_fraction = static_cast<double>(solid) / (static_cast<double>(act.size()) * resolution * resolution);
    out.design_volume = vol / static_cast<double>(act.size());
  }
  return out;
}

AssembledStructure assemble_structure(const TopOptProblem& p, const DesignField& field, int resolution) {
  std::vector<int> cls = field.cls;
  if (cls.empty()) {
    cls.resize(static_cast<std::size_t>(p.n_active()));
    for (int e = 0; e < p.n_active(); ++e)
      cls[static_cast<std::size_t>(e)] = nearest_class(p.penalty().anchors, {field.z1_f[e], field.z2_f[e]});
  }
  return assemble_structure(p.mesh(), cls, {field.rho_f.data(), static_cast<std::size_t>(field.rho_f.size())},
                            resolution);
}

}  // namespace mctopo::topopt
