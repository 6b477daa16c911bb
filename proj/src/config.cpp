#include "mctopo/config.hpp"

#include <fstream>
#include <set>

#include "mctopo/error.hpp"
#include "mctopo/io.hpp"

namespace mctopo::config {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::Config, where + ": " + what);
}

const json& section(const json& doc, const std::string& name, const std::set<std::string>& allowed,
                    const std::string& where) {
  static const json empty = json::object();
  if (!doc.contains(name)) return empty;
  const json& s = doc.at(name);
  if (!s.is_object()) bad(where + name, "must be an object");
  for (const auto& [k, v] : s.items())
    if (!allowed.count(k)) bad(where + name, "unknown key '" + k + "'");
  return s;
}

template <typename T>
void get(const json& obj, const std::string& key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) bad(where + "." + key, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        bad(where + "." + key, "expected a non-negative integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) bad(where + "." + key, "expected a number");
  } else {
    if (!v.is_string()) bad(where + "." + key, "expected a string");
  }
  out = v.get<T>();
}

void require(bool ok, const std::string& where, const std::string& what) {
  if (!ok) bad(where, what);
}

}  // namespace

int parse_class(const json& v) {
  if (v.is_number_integer()) {
    const int id = v.get<int>();
    if (id < 1 || id > microlib::kClassCount) bad("optimize.single_class", "class id must be 1..6");
    return id;
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.size() == 1 && s[0] >= 'A' && s[0] < 'A' + microlib::kClassCount) return s[0] - 'A' + 1;
  }
  bad("optimize.single_class", "expected a class id 1..6 or a letter A..F");
}

double default_vmax(const std::string& problem) { return problem == "l_beam" ? 0.6 : 0.5; }

RunConfig from_json(const json& doc, std::optional<std::uint64_t> seed_override,
                    std::optional<std::string> out_override) {
  if (!doc.is_object()) bad("config", "top level must be an object");
  static const std::set<std::string> top{"seed", "out", "gen_library", "fit", "optimize", "render"};
  for (const auto& [k, v] : doc.items())
    if (!top.count(k)) bad("config", "unknown key '" + k + "'");

  RunConfig c;
  get(doc, "seed", c.seed, "config");
  get(doc, "out", c.out, "config");
  if (seed_override) c.seed = *seed_override;
  if (out_override) c.out = *out_override;

  {
    const json& s = section(doc, "gen_library", {"samples_per_class", "vf_lo", "vf_hi", "resolution", "material", "write_grids"}, "");
    auto& L = c.library;
    get(s, "samples_per_class", L.samples_per_class, "gen_library");
    get(s, "vf_lo", L.vf_lo, "gen_library");
    get(s, "vf_hi", L.vf_hi, "gen_library");
    get(s, "resolution", L.resolution, "gen_library");
    get(s, "write_grids", L.write_grids, "gen_library");
    const json& m = section(s, "material", {"E", "nu", "void_ratio"}, "gen_library.");
    get(m, "E", L.material.E, "gen_library.material");
    get(m, "nu", L.material.nu, "gen_library.material");
    get(m, "void_ratio", L.material.void_ratio, "gen_library.material");
    require(L.samples_per_class >= 1, "gen_library.samples_per_class", "must be >= 1");
    require(L.vf_lo > 0.0 && L.vf_lo <= L.vf_hi && L.vf_hi <= 0.99, "gen_library.vf_lo/vf_hi", "need 0 < vf_lo <= vf_hi <= 0.99");
    require(L.resolution >= 8 && L.resolution % 4 == 0, "gen_library.resolution", "must be a multiple of 4, >= 8");
    try {
      L.material.validate();
    } catch (const Error& e) {
      bad("gen_library.material", e.what());
    }
  }
  {
    const json& s = section(doc, "fit", {"dataset", "starts", "nugget", "max_iterations", "log_phi_lo", "log_phi_hi", "latent_init", "repetitions", "train_fraction"}, "");
    auto& F = c.fit;
    get(s, "dataset", F.dataset, "fit");
    get(s, "starts", F.options.starts, "fit");
    get(s, "nugget", F.options.nugget, "fit");
    get(s, "max_iterations", F.options.max_iterations, "fit");
    get(s, "log_phi_lo", F.options.log_phi_lo, "fit");
    get(s, "log_phi_hi", F.options.log_phi_hi, "fit");
    get(s, "latent_init", F.options.latent_init, "fit");
    get(s, "repetitions", F.repetitions, "fit");
    get(s, "train_fraction", F.train_fraction, "fit");
    F.options.seed = c.seed;
    require(F.options.starts >= 1, "fit.starts", "must be >= 1");
    require(F.options.nugget >= 0.0, "fit.nugget", "must be >= 0");
    require(F.options.max_iterations >= 1, "fit.max_iterations", "must be >= 1");
    require(F.options.log_phi_lo <= F.options.log_phi_hi, "fit.log_phi_lo/hi", "need lo <= hi");
    require(F.options.latent_init > 0.0, "fit.latent_init", "must be > 0");
    require(F.repetitions >= 0, "fit.repetitions", "must be >= 0");
    require(F.train_fraction > 0.0 && F.train_fraction < 1.0, "fit.train_fraction", "must be in (0, 1)");
  }
  {
    const json& s = section(doc, "optimize", {"model", "problem", "nx", "ny", "mode", "single_class", "vmax", "rho_min", "rho_max", "r_min", "tol", "max_iter", "z_margin", "filter_latent", "volume_on_filtered", "stiffness_floor", "penalty", "mma", "resolution", "write_image"}, "");
    auto& O = c.optimize;
    auto& T = O.settings;
    get(s, "model", O.model, "optimize");
    get(s, "problem", O.problem, "optimize");
    get(s, "nx", O.nx, "optimize");
    get(s, "ny", O.ny, "optimize");
    get(s, "mode", O.mode, "optimize");
    if (s.contains("single_class")) O.single_class = parse_class(s.at("single_class"));
    if (s.contains("vmax")) {
      double v = 0.0;
      get(s, "vmax", v, "optimize");
      O.vmax = v;
    }
    get(s, "rho_min", T.rho_min, "optimize");
    get(s, "rho_max", T.rho_max, "optimize");
    get(s, "r_min", T.r_min, "optimize");
    get(s, "tol", T.tol, "optimize");
    get(s, "max_iter", T.max_iter, "optimize");
    get(s, "z_margin", T.z_margin, "optimize");
    get(s, "filter_latent", T.filter_latent, "optimize");
    get(s, "volume_on_filtered", T.volume_on_filtered, "optimize");
    get(s, "stiffness_floor", T.stiffness_floor, "optimize");
    get(s, "resolution", O.resolution, "optimize");
    get(s, "write_image", O.write_image, "optimize");
    const json& pen = section(s, "penalty", {"lambda", "gamma"}, "optimize.");
    get(pen, "lambda", T.lambda, "optimize.penalty");
    if (pen.contains("gamma") && !pen.at("gamma").is_null()) {
      double g = 0.0;
      get(pen, "gamma", g, "optimize.penalty");
      T.gamma = g;
    }
    const json& mm = section(s, "mma", {"move_limit", "asy_init", "asy_decr", "asy_incr", "albefa", "raa0", "dual_tol"}, "optimize.");
    get(mm, "move_limit", T.mma.move_limit, "optimize.mma");
    get(mm, "asy_init", T.mma.asy_init, "optimize.mma");
    get(mm, "asy_decr", T.mma.asy_decr, "optimize.mma");
    get(mm, "asy_incr", T.mma.asy_incr, "optimize.mma");
    get(mm, "albefa", T.mma.albefa, "optimize.mma");
    get(mm, "raa0", T.mma.raa0, "optimize.mma");
    get(mm, "dual_tol", T.mma.dual_tol, "optimize.mma");
    require(O.problem == "l_beam" || O.problem == "mbb_two_load" || O.problem == "cantilever", "optimize.problem",
            "must be l_beam, mbb_two_load or cantilever");
    require(O.mode == "multi" || O.mode == "single" || O.mode == "both", "optimize.mode", "must be multi, single or both");
    require(O.nx >= 0 && O.ny >= 0, "optimize.nx/ny", "must be >= 0");
    require(O.resolution >= 8 && O.resolution % 4 == 0, "optimize.resolution", "must be a multiple of 4, >= 8");
    T.vmax = O.vmax.value_or(default_vmax(O.problem));
    try {
      T.validate();
    } catch (const Error& e) {
      bad("optimize", e.what());
    }
  }
  {
    const json& s = section(doc, "render", {"field", "resolution", "map_scale"}, "");
    get(s, "field", c.render.field, "render");
    get(s, "resolution", c.render.resolution, "render");
    get(s, "map_scale", c.render.map_scale, "render");
    require(c.render.resolution >= 8 && c.render.resolution % 4 == 0, "render.resolution", "must be a multiple of 4, >= 8");
    require(c.render.map_scale >= 1, "render.map_scale", "must be >= 1");
  }

  // Canonical effective configuration (every key explicit) for hashing and provenance.
  const auto& L = c.library;
  const auto& F = c.fit;
  const auto& O = c.optimize;
  const auto& T = O.settings;
  c.effective = {
      {"seed", c.seed},
      {"out", c.out},
      {"gen_library",
       {{"samples_per_class", L.samples_per_class},
        {"vf_lo", L.vf_lo},
        {"vf_hi", L.vf_hi},
        {"resolution", L.resolution},
        {"write_grids", L.write_grids},
        {"material", {{"E", L.material.E}, {"nu", L.material.nu}, {"void_ratio", L.material.void_ratio}}}}},
      {"fit",
       {{"dataset", F.dataset},
        {"starts", F.options.starts},
        {"nugget", F.options.nugget},
        {"max_iterations", F.options.max_iterations},
        {"log_phi_lo", F.options.log_phi_lo},
        {"log_phi_hi", F.options.log_phi_hi},
        {"latent_init", F.options.latent_init},
        {"repetitions", F.repetitions},
        {"train_fraction", F.train_fraction}}},
      {"optimize",
       {{"model", O.model},
        {"problem", O.problem},
        {"nx", O.nx},
        {"ny", O.ny},
        {"mode", O.mode},
        {"single_class", O.single_class},
        {"vmax", T.vmax},
        {"rho_min", T.rho_min},
        {"rho_max", T.rho_max},
        {"r_min", T.r_min},
        {"tol", T.tol},
        {"max_iter", T.max_iter},
        {"z_margin", T.z_margin},
        {"filter_latent", T.filter_latent},
        {"volume_on_filtered", T.volume_on_filtered},
        {"stiffness_floor", T.stiffness_floor},
        {"resolution", O.resolution},
        {"write_image", O.write_image},
        {"penalty", {{"lambda", T.lambda}, {"gamma", T.gamma ? json(*T.gamma) : json(nullptr)}}},
        {"mma",
         {{"move_limit", T.mma.move_limit},
          {"asy_init", T.mma.asy_init},
          {"asy_decr", T.mma.asy_decr},
          {"asy_incr", T.mma.asy_incr},
          {"albefa", T.mma.albefa},
          {"raa0", T.mma.raa0},
          {"dual_tol", T.mma.dual_tol}}}}},
      {"render", {{"field", c.render.field}, {"resolution", c.render.resolution}, {"map_scale", c.render.map_scale}}}};
  // The output directory is not part of the run's identity: relocating a run must
  // not change its bytes.
  json hashed = c.effective;
  hashed.erase("out");
  c.hash = io::fnv1a_hex(hashed.dump());
  return c;
}

RunConfig load(const std::optional<std::filesystem::path>& path, std::optional<std::uint64_t> seed_override,
               std::optional<std::string> out_override) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config " + path->string());
    try {
      doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Config, "config " + path->string() + " is not valid JSON: " + e.what());
    }
  }
  return from_json(doc, seed_override, out_override);
}

}  // namespace mctopo::config
