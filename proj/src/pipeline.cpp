#include "mctopo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mctopo/error.hpp"
#include "mctopo/gp_io.hpp"
#include "mctopo/microlib.hpp"
#include "mctopo/problems.hpp"
#include "mctopo/topopt.hpp"

namespace mctopo::pipeline {

namespace fs = std::filesystem;
using io::format_double;
using nlohmann::json;

namespace {

std::string fmt(double v) { return format_double(v); }

fs::path input_path(const std::string& configured, const config::RunConfig& cfg, const char* fallback) {
  return configured.empty() ? fs::path(cfg.out) / fallback : fs::path(configured);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw Error(ErrorKind::Io, std::string(what) + " not found: " + p.string());
}

json meta_json(const io::Meta& meta) {
  json j = json::object();
  for (const auto& [k, v] : meta.entries()) j[k] = v;
  return j;
}

void save_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace

io::Meta make_meta(const config::RunConfig& cfg, const std::string& command) {
  return {command, cfg.hash, cfg.seed};
}

// ---------------------------------------------------------------------------
// gen-library

std::string dataset_csv(std::span<const homog::DatasetRow> rows, const io::Meta& meta) {
  io::CsvWriter w(meta, {"class_id", "vf", "C11", "C12", "C22", "C66"});
  for (const auto& r : rows)
    w.row({std::to_string(r.class_id), fmt(r.vf), fmt(r.Y[0]), fmt(r.Y[1]), fmt(r.Y[2]), fmt(r.Y[3])});
  return w.str();
}

std::vector<homog::DatasetRow> read_dataset(const fs::path& path) {
  require_file(path, "dataset");
  const auto t = io::read_csv(path);
  std::vector<homog::DatasetRow> rows;
  rows.reserve(t.rows.size());
  const int cc = t.column("class_id");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    homog::DatasetRow row{};
    const std::string& id = t.rows[r][static_cast<std::size_t>(cc)];
    try {
      std::size_t used = 0;
      row.class_id = std::stoi(id, &used);
      if (used != id.size()) throw std::invalid_argument(id);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, path.string() + ": row " + std::to_string(r) + ": bad class_id '" + id + "'");
    }
    row.vf = t.number(r, "vf");
    for (std::size_t k = 0; k < StiffnessVec::kSize; ++k) row.Y[k] = t.number(r, kStiffnessNames[k]);
    rows.push_back(row);
  }
  if (rows.empty()) throw Error(ErrorKind::Io, path.string() + ": dataset has no rows");
  return rows;
}

int gen_library(const config::RunConfig& cfg, std::ostream& log) {
  const auto& L = cfg.library;
  const auto meta = make_meta(cfg, "gen-library");
  const fs::path out(cfg.out);

  log << "gen-library: " << L.samples_per_class << " samples per class, vf [" << L.vf_lo << ", " << L.vf_hi
      << "], " << L.resolution << " px\n";
  const auto lib = microlib::build_library(L.samples_per_class, L.vf_lo, L.vf_hi, L.resolution);
  const auto rows = homog::homogenize_library(lib, L.material);

  io::CsvWriter manifest(meta, {"sample", "class_id", "class", "target_vf", "achieved_vf", "thickness",
                                "within_tolerance", "grid_file"});
  int off_target = 0;
  for (std::size_t s = 0; s < lib.size(); ++s) {
    const auto& x = lib[s];
    std::string grid_file;
    if (L.write_grids) {
      std::ostringstream name;
      name << "grids/class" << x.class_id << "_" << s << ".pgm";
      grid_file = name.str();
      io::write_pgm(out / grid_file, x.grid, meta);
    }
    off_target += !x.within_tolerance;
    manifest.row({std::to_string(s), std::to_string(x.class_id), std::string(1, microlib::class_letter(x.class_id)),
                  fmt(x.target_vf), fmt(x.achieved_vf), fmt(x.thickness), x.within_tolerance ? "1" : "0",
                  grid_file});
  }
  manifest.save(out / "manifest.csv");
  io::write_file_atomic(out / "dataset.csv", dataset_csv(rows, meta));
  log << "gen-library: wrote " << rows.size() << " dataset rows to " << (out / "dataset.csv").string() << " ("
      << off_target << " samples outside the nominal vf tolerance; achieved vf is used)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

ValidationReport validate(std::span<const homog::DatasetRow> rows, const gp::FitOptions& options,
                          int repetitions, double train_fraction, std::uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw Error(ErrorKind::InvalidInput, "train_fraction must be in (0, 1)");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].class_id].push_back(static_cast<int>(i));
  const int n_levels = by_class.empty() ? 0 : by_class.rbegin()->first;
  const gp::Dataset all = gp::dataset_from_rows(rows, n_levels);

  ValidationReport rep;
  std::mt19937_64 master(seed);
  for (int k = 0; k < repetitions; ++k) {
    const std::uint64_t s = master();
    std::mt19937_64 rng(s);
    std::vector<int> train, test;
    for (auto& [cls, idx] : by_class) {
      std::vector<int> perm = idx;
      std::shuffle(perm.begin(), perm.end(), rng);
      auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(perm.size())));
      n_train = std::clamp<std::size_t>(n_train, 1, perm.size() > 1 ? perm.size() - 1 : 1);
      train.insert(train.end(), perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
      test.insert(test.end(), perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    if (test.empty()) throw Error(ErrorKind::InvalidInput, "validation split left no test rows");

    gp::FitOptions o = options;
    o.seed = s;
    const auto model = gp::fit(all.subset(train), o);
    Eigen::Vector4d mse = Eigen::Vector4d::Zero();
    for (int i : test) {
      const auto y = model.predict(all.X.row(i).transpose(), model.anchor(all.levels[static_cast<std::size_t>(i)]));
      for (int c = 0; c < 4; ++c) mse[c] += std::pow(y[c] - all.Y(i, c), 2);
    }
    mse /= static_cast<double>(test.size());
    rep.runs.push_back({k, s, mse});
  }
  const auto n = static_cast<double>(rep.runs.size());
  if (n > 0) {
    for (const auto& r : rep.runs) rep.mean += r.mse;
    rep.mean /= n;
    if (n > 1) {
      for (const auto& r : rep.runs) rep.variance += (r.mse - rep.mean).cwiseAbs2();
      rep.variance /= n - 1.0;
    }
  }
  return rep;
}

int fit(const config::RunConfig& cfg, std::ostream& log) {
  const auto& F = cfg.fit;
  const auto meta = make_meta(cfg, "fit");
  const fs::path out(cfg.out);
  const auto rows = read_dataset(input_path(F.dataset, cfg, "dataset.csv"));
  const auto data = gp::dataset_from_rows(rows);

  gp::FitReport report;
  const auto model = gp::fit(data, F.options, &report);
  log << "fit: " << data.size() << " rows, " << data.n_levels << " classes; best objective "
      << report.best_objective << " (start " << report.best_start << ", " << report.successful_starts << "/"
      << F.options.starts << " starts succeeded)\n";
  gp::save_model(out / "model.json", model, meta_json(meta));

  io::CsvWriter latent(meta, {"class_id", "class", "z1", "z2"});
  for (const auto& l : gp::export_latent(model))
    latent.row({std::to_string(l.class_id), std::string(1, microlib::class_letter(l.class_id)), fmt(l.z1), fmt(l.z2)});
  latent.save(out / "latent.csv");

  if (F.repetitions > 0) {
    const auto v = validate(rows, F.options, F.repetitions, F.train_fraction, cfg.seed);
    io::CsvWriter runs(meta, {"rep", "seed", "mse_C11", "mse_C12", "mse_C22", "mse_C66"});
    for (const auto& r : v.runs)
      runs.row({std::to_string(r.rep), std::to_string(r.seed), fmt(r.mse[0]), fmt(r.mse[1]), fmt(r.mse[2]), fmt(r.mse[3])});
    runs.save(out / "validation_runs.csv");
    io::CsvWriter table(meta, {"component", "mse_mean", "mse_variance"});
    for (int c = 0; c < 4; ++c) table.row({kStiffnessNames[static_cast<std::size_t>(c)], fmt(v.mean[c]), fmt(v.variance[c])});
    table.save(out / "validation.csv");
    log << "fit: validation over " << v.runs.size() << " splits, mean MSE";
    for (int c = 0; c < 4; ++c) log << " " << kStiffnessNames[static_cast<std::size_t>(c)] << "=" << v.mean[c];
    log << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize

namespace {

void write_trace(const fs::path& path, const topopt::StageResult& r, const io::Meta& meta) {
  io::CsvWriter w(meta, {"iter", "c", "V", "step", "clipped"});
  for (const auto& t : r.trace)
    w.row({std::to_string(t.iter), fmt(t.c), fmt(t.volume), fmt(t.step), std::to_string(t.clipped)});
  w.save(path);
}

std::vector<int> element_classes(const topopt::TopOptProblem& p, const topopt::DesignField& f) {
  if (!f.cls.empty()) return f.cls;
  std::vector<int> cls(static_cast<std::size_t>(p.n_active()));
  for (int e = 0; e < p.n_active(); ++e)
    cls[static_cast<std::size_t>(e)] = topopt::nearest_class(p.penalty().anchors, {f.z1_f[e], f.z2_f[e]});
  return cls;
}

struct StageOutputs {
  std::vector<int> cls;
  double c = 0.0;
};

StageOutputs write_field(topopt::TopOptProblem& p, const topopt::DesignField& f, const fs::path& csv,
                         const fs::path& vtk, const io::Meta& meta) {
  const auto ev = topopt::evaluate_design(p, f);
  const auto cls = element_classes(p, f);
  const auto& mesh = p.mesh();
  std::vector<int> slot(static_cast<std::size_t>(mesh.n_elements()), -1);
  for (int k = 0; k < p.n_active(); ++k) slot[static_cast<std::size_t>(p.active()[static_cast<std::size_t>(k)])] = k;

  io::CsvWriter w(meta, {"element", "i", "j", "active", "class", "rho", "z1", "z2", "rho_phys", "z1_phys",
                         "z2_phys", "C11", "C12", "C22", "C66", "penalty", "energy"});
  std::vector<io::VtkField> fields{{"active", {}}, {"class", {}}, {"rho_phys", {}}, {"z1_phys", {}},
                                   {"z2_phys", {}}, {"energy", {}}};
  for (auto& fl : fields) fl.values.assign(static_cast<std::size_t>(mesh.n_elements()), 0.0);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int i = e % mesh.nx, j = e / mesh.nx, k = slot[static_cast<std::size_t>(e)];
    if (k < 0) {
      w.row({std::to_string(e), std::to_string(i), std::to_string(j), "0", "0", "0", "0", "0", "0", "0", "0", "0",
             "0", "0", "0", "0", "0"});
      continue;
    }
    const auto& Y = ev.Y[static_cast<std::size_t>(k)];
    const int c = cls[static_cast<std::size_t>(k)];
    w.row({std::to_string(e), std::to_string(i), std::to_string(j), "1", std::to_string(c), fmt(f.rho[k]),
           fmt(f.z1[k]), fmt(f.z2[k]), fmt(f.rho_f[k]), fmt(f.z1_f[k]), fmt(f.z2_f[k]), fmt(Y[0]), fmt(Y[1]),
           fmt(Y[2]), fmt(Y[3]), fmt(ev.f[k]), fmt(ev.energy[k])});
    const auto ue = static_cast<std::size_t>(e);
    fields[0].values[ue] = 1.0;
    fields[1].values[ue] = c;
    fields[2].values[ue] = f.rho_f[k];
    fields[3].values[ue] = f.z1_f[k];
    fields[4].values[ue] = f.z2_f[k];
    fields[5].values[ue] = ev.energy[k];
  }
  w.save(csv);
  io::write_vtk(vtk, mesh.nx, mesh.ny, fields, meta);
  return {cls, ev.c};
}

json stage_json(const topopt::StageResult& r) {
  return {{"stage", r.stage},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"c_initial", r.c_initial},
          {"c_final", r.c_final},
          {"volume_final", r.volume_final}};
}

}  // namespace

int optimize(const config::RunConfig& cfg, std::ostream& log) {
  const auto& O = cfg.optimize;
  const auto meta = make_meta(cfg, "optimize");
  const fs::path out(cfg.out);
  const fs::path model_path = input_path(O.model, cfg, "model.json");
  require_file(model_path, "model");
  const auto model = gp::load_model(model_path);
  auto prob = problems::by_name(O.problem, O.nx, O.ny);
  topopt::TopOptProblem p(prob.mesh, prob.loads, model, O.settings);
  log << "optimize: " << prob.name << " " << prob.mesh.nx << "x" << prob.mesh.ny << " (" << p.n_active()
      << " active elements, " << prob.loads.size() << " load case(s)), vmax " << O.settings.vmax << ", mode "
      << O.mode << "\n";

  const bool run_multi = O.mode != "single", run_single = O.mode != "multi";
  bool all_converged = true;
  json summary = {{"meta", meta_json(meta)}, {"problem", prob.name}, {"nx", prob.mesh.nx}, {"ny", prob.mesh.ny},
                  {"active_elements", p.n_active()}, {"vmax", O.settings.vmax}};

  auto finish = [&](const topopt::StageResult& r, const std::string& stem, const char* trace_name) {
    write_trace(out / trace_name, r, meta);
    all_converged = all_converged && r.converged;
    log << "optimize: " << r.stage << " c " << r.c_initial << " -> " << r.c_final << " in " << r.iterations
        << " iterations (" << (r.converged ? "converged" : "max_iter") << "), V " << r.volume_final << "\n";
    return write_field(p, r.field, out / (stem + ".csv"), out / (stem + ".vtk"), meta);
  };
  auto images = [&](const StageOutputs& so, const topopt::DesignField& f, const std::string& stem) {
    if (!O.write_image) return;
    ElementField ef{p.mesh(), so.cls, {f.rho_f.data(), f.rho_f.data() + f.rho_f.size()}};
    for (const auto& w : render_field(ef, out, stem, O.resolution, cfg.render.map_scale, meta))
      log << "optimize: warning: " << w << "\n";
  };

  double c_single = 0.0, c_multi = 0.0;
  if (run_single) {
    const auto r = topopt::run_single_class(p, O.single_class);
    const auto so = finish(r, "field_single", "trace_single.csv");
    images(so, r.field, "single");
    c_single = r.c_final;
    summary["single"] = stage_json(r);
    summary["single"]["class"] = std::string(1, microlib::class_letter(O.single_class));
  }
  if (run_multi) {
    const auto s1 = topopt::stage1(p);
    finish(s1, "field_stage1", "trace_stage1.csv");
    const auto s2 = topopt::stage2(p, s1.field);
    const auto so = finish(s2, "field", "trace_stage2.csv");
    images(so, s2.field, "multi");
    c_multi = s2.c_final;
    summary["stage1"] = stage_json(s1);
    summary["stage2"] = stage_json(s2);

    io::CsvWriter scatter(meta, {"kind", "element", "class", "z1", "z2"});
    for (int t = 1; t <= p.n_classes(); ++t)
      scatter.row({"anchor", "-1", std::string(1, microlib::class_letter(t)), fmt(p.anchor(t)[0]), fmt(p.anchor(t)[1])});
    const auto cls1 = element_classes(p, s1.field);
    for (int e = 0; e < p.n_active(); ++e)
      scatter.row({"element", std::to_string(p.active()[static_cast<std::size_t>(e)]),
                   std::string(1, microlib::class_letter(cls1[static_cast<std::size_t>(e)])), fmt(s1.field.z1_f[e]),
                   fmt(s1.field.z2_f[e])});
    scatter.save(out / "latent_scatter.csv");

    const auto usage = topopt::class_usage(s2.field, p.n_classes());
    io::CsvWriter u(meta, {"class_id", "class", "elements", "percent"});
    json uj = json::object();
    log << "optimize: class usage";
    for (int t = 1; t <= p.n_classes(); ++t) {
      const auto n = std::count(so.cls.begin(), so.cls.end(), t);
      const double pct = usage[static_cast<std::size_t>(t - 1)];
      const std::string letter(1, microlib::class_letter(t));
      u.row({std::to_string(t), letter, std::to_string(n), fmt(pct)});
      uj[letter] = pct;
      log << " " << letter << "=" << pct << "%";
    }
    log << "\n";
    u.save(out / "class_usage.csv");
    summary["class_usage_percent"] = uj;
  }
  if (run_single && run_multi) {
    const double impr = 100.0 * (c_single - c_multi) / c_single;
    summary["improvement_percent"] = impr;
    io::CsvWriter cmp(meta, {"c_single", "c_multi", "improvement_percent"});
    cmp.row({fmt(c_single), fmt(c_multi), fmt(impr)});
    cmp.save(out / "comparison.csv");
    log << "optimize: multiclass " << c_multi << " vs single-class " << c_single << " (" << impr << "% lower)\n";
  }
  save_json(out / "summary.json", summary);
  return all_converged ? kExitOk : kExitMaxIter;
}

// ---------------------------------------------------------------------------
// render

std::array<std::uint8_t, 3> class_color(int class_id) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> palette{{
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};
  if (class_id < 1 || class_id > static_cast<int>(palette.size()))
    throw Error(ErrorKind::InvalidInput, "class " + std::to_string(class_id) + " is not in the library");
  return palette[static_cast<std::size_t>(class_id - 1)];
}

ElementField read_field(const fs::path& path) {
  require_file(path, "field");
  const auto t = io::read_csv(path);
  if (t.rows.empty()) throw Error(ErrorKind::Io, path.string() + ": empty field");
  int nx = 0, ny = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    nx = std::max(nx, static_cast<int>(t.number(r, "i")) + 1);
    ny = std::max(ny, static_cast<int>(t.number(r, "j")) + 1);
  }
  if (static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) != t.rows.size())
    throw Error(ErrorKind::Io, path.string() + ": field must list every element of an nx x ny grid");
  ElementField f;
  f.mesh = fea::MacroMesh::rectangle(nx, ny);
  std::vector<int> cls(t.rows.size(), 0);
  std::vector<double> rho(t.rows.size(), 0.0);
  std::vector<char> seen(t.rows.size(), 0);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int e = f.mesh.element(static_cast<int>(t.number(r, "i")), static_cast<int>(t.number(r, "j")));
    if (seen[static_cast<std::size_t>(e)]++) throw Error(ErrorKind::Io, path.string() + ": duplicate element");
    f.mesh.active[static_cast<std::size_t>(e)] = t.number(r, "active") != 0.0;
    cls[static_cast<std::size_t>(e)] = static_cast<int>(t.number(r, "class"));
    rho[static_cast<std::size_t>(e)] = t.number(r, "rho_phys");
  }
  for (int e : f.mesh.active_elements()) {
    const int c = cls[static_cast<std::size_t>(e)];
    if (c < 1 || c > microlib::kClassCount)
      throw Error(ErrorKind::InvalidInput, "element " + std::to_string(e) + ": class " + std::to_string(c) +
                                               " is not in the library");
    f.cls.push_back(c);
    f.rho.push_back(rho[static_cast<std::size_t>(e)]);
  }
  return f;
}

std::vector<std::string> render_field(const ElementField& f, const fs::path& dir, const std::string& stem,
                                      int resolution, int map_scale, const io::Meta& meta) {
  std::vector<std::string> warnings;
  const auto& mesh = f.mesh;
  const auto act = mesh.active_elements();
  if (resolution > 0) {
    const auto s = topopt::assemble_structure(mesh, f.cls, f.rho, resolution);
    io::Image img(s.width, s.height, 1);
    for (std::size_t k = 0; k < s.solid.size(); ++k) img.pixels[k] = s.solid[k] ? 0 : 255;
    io::write_png(dir / (stem + "_structure.png"), img, meta);
    warnings = s.warnings;
  }
  io::Image classes(mesh.nx * map_scale, mesh.ny * map_scale, 3);
  io::Image density(mesh.nx * map_scale, mesh.ny * map_scale, 1, 255);
  for (std::size_t k = 0; k < classes.pixels.size(); k += 3)
    std::copy(std::begin(kBackground), std::end(kBackground), classes.pixels.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t k = 0; k < act.size(); ++k) {
    const int ei = act[k] % mesh.nx, ej = act[k] / mesh.nx;
    const auto col = class_color(f.cls[k]);
    const auto gray = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::clamp(f.rho[k], 0.0, 1.0))));
    for (int b = 0; b < map_scale; ++b) {
      const int y = (mesh.ny - 1 - ej) * map_scale + b;
      for (int a = 0; a < map_scale; ++a) {
        const int x = ei * map_scale + a;
        std::copy(col.begin(), col.end(), classes.at(x, y));
        *density.at(x, y) = gray;
      }
    }
  }
  io::write_png(dir / (stem + "_classes.png"), classes, meta);
  io::write_png(dir / (stem + "_density.png"), density, meta);
  return warnings;
}

int render(const config::RunConfig& cfg, std::ostream& log) {
  const auto& R = cfg.render;
  const auto meta = make_meta(cfg, "render");
  const fs::path field_path = input_path(R.field, cfg, "field.csv");
  const auto f = read_field(field_path);
  const auto stem = field_path.stem().string();
  for (const auto& w : render_field(f, fs::path(cfg.out), stem, R.resolution, R.map_scale, meta))
    log << "render: warning: " << w << "\n";
  std::set<int> used(f.cls.begin(), f.cls.end());
  log << "render: " << f.mesh.nx << "x" << f.mesh.ny << " field, " << used.size() << " classes -> "
      << (fs::path(cfg.out) / stem).string() << "_{structure,classes,density}.png\n";
  return kExitOk;
}

}  // namespace mctopo::pipeline
