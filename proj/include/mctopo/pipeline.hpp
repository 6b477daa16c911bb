#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mctopo/config.hpp"
#include "mctopo/fea.hpp"
#include "mctopo/homog.hpp"
#include "mctopo/io.hpp"

// The four CLI commands. Each returns a process exit code: 0 success (converged),
// 2 optimization stopped at max_iter, 1 error (thrown as mctopo::Error).
namespace mctopo::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMaxIter = 2;

int gen_library(const config::RunConfig& cfg, std::ostream& log);
int fit(const config::RunConfig& cfg, std::ostream& log);
int optimize(const config::RunConfig& cfg, std::ostream& log);
int render(const config::RunConfig& cfg, std::ostream& log);

io::Meta make_meta(const config::RunConfig& cfg, const std::string& command);

/// Reads the dataset CSV written by gen_library (class_id, vf, C11, C12, C22, C66).
std::vector<homog::DatasetRow> read_dataset(const std::filesystem::path& path);
std::string dataset_csv(std::span<const homog::DatasetRow> rows, const io::Meta& meta);

struct ValidationRun {
  int rep;
  std::uint64_t seed;
  Eigen::Vector4d mse;
};
struct ValidationReport {
  std::vector<ValidationRun> runs;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Vector4d variance = Eigen::Vector4d::Zero();  // sample variance (n - 1)
};

/// Repeated random splits, stratified by class so every level keeps training rows.
/// Split k uses seed_k drawn from mt19937_64(seed) for both the shuffle and the fit.
ValidationReport validate(std::span<const homog::DatasetRow> rows, const gp::FitOptions& options,
                          int repetitions, double train_fraction, std::uint64_t seed);

/// Class-map colors (RGB) per class id 1..6; passive elements use kBackground.
inline constexpr std::uint8_t kBackground[3] = {255, 255, 255};
std::array<std::uint8_t, 3> class_color(int class_id);

struct ElementField {
  fea::MacroMesh mesh;
  std::vector<int> cls;      // per active element
  std::vector<double> rho;   // physical rho per active element
};
ElementField read_field(const std::filesystem::path& path);

/// Writes <stem>_structure.png (if resolution > 0), <stem>_classes.png and <stem>_density.png.
std::vector<std::string> render_field(const ElementField& f, const std::filesystem::path& dir,
                                      const std::string& stem, int resolution, int map_scale,
                                      const io::Meta& meta);

}  // namespace mctopo::pipeline
