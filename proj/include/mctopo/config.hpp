#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "mctopo/gp.hpp"
#include "mctopo/homog.hpp"
#include "mctopo/topopt.hpp"

// Run configuration: one JSON document with a section per command. Unknown keys
// anywhere are rejected; omitted keys take the defaults below.
namespace mctopo::config {

struct LibraryConfig {
  int samples_per_class = 20;
  double vf_lo = 0.1, vf_hi = 0.95;
  int resolution = microlib::kDefaultResolution;
  homog::BaseMaterial material;
  bool write_grids = true;
};

struct FitConfig {
  std::string dataset;  // default <out>/dataset.csv
  gp::FitOptions options;
  int repetitions = 10;
  double train_fraction = 0.8;
};

struct OptimizeConfig {
  std::string model;  // default <out>/model.json
  std::string problem = "l_beam";
  int nx = 0, ny = 0;  // 0: problem default
  std::string mode = "multi";  // multi | single | both
  int single_class = 1;
  std::optional<double> vmax;  // default: problem-specific
  topopt::TopOptSettings settings;
  int resolution = microlib::kDefaultResolution;
  bool write_image = true;
};

struct RenderConfig {
  std::string field;  // default <out>/field.csv
  int resolution = microlib::kDefaultResolution;
  int map_scale = 10;  // pixels per element in the class and density maps
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "out";
  LibraryConfig library;
  FitConfig fit;
  OptimizeConfig optimize;
  RenderConfig render;

  nlohmann::json effective;  // canonical form after defaults and overrides
  std::string hash;          // FNV-1a of effective.dump()
};

/// Throws Config on unknown keys, wrong types or out-of-range values.
RunConfig from_json(const nlohmann::json& doc, std::optional<std::uint64_t> seed_override = std::nullopt,
                    std::optional<std::string> out_override = std::nullopt);
RunConfig load(const std::optional<std::filesystem::path>& path,
               std::optional<std::uint64_t> seed_override = std::nullopt,
               std::optional<std::string> out_override = std::nullopt);

int parse_class(const nlohmann::json& v);

/// Default Vmax per problem (0.6 for the L-beam, 0.5 otherwise).
double default_vmax(const std::string& problem);

}  // namespace mctopo::config
