#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mctopo::microlib {

inline constexpr int kDefaultResolution = 100;
inline constexpr int kClassCount = 6;
inline constexpr double kVfTolerance = 0.005;
inline constexpr int kMinRodPixels = 2;

/// Rod centerline in unit-cell coordinates. Endpoints must lie on multiples of 1/4
/// so rasterization stays exact in integer arithmetic. `weight` scales the common
/// thickness (1 for ordinary rods, 2 for the thickened rod of the x/y-stiff classes).
struct Rod {
  double x0, y0, x1, y1;
  int weight = 1;
};

enum class Symmetry { Cubic, XStiff, YStiff };

struct MicroClass {
  int id;  // 1..6
  std::string name;
  std::vector<Rod> rods;
  Symmetry symmetry;
};

/// Binary occupancy grid, row-major with row 0 at y = 0 (bottom of the cell).
class PixelGrid {
 public:
  PixelGrid() = default;
  explicit PixelGrid(int resolution, std::uint8_t fill = 0);

  int resolution() const { return n_; }
  bool solid(int i, int j) const { return cells_[static_cast<std::size_t>(j) * n_ + i] != 0; }
  void set(int i, int j, bool v) { cells_[static_cast<std::size_t>(j) * n_ + i] = v ? 1 : 0; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  std::size_t solid_count() const;
  double volume_fraction() const;

  PixelGrid transposed() const;
  PixelGrid rotated90() const;
  /// Single 4-connected solid component.
  bool connected() const;
  /// Solid pixels on each of the four boundary rows/columns.
  bool touches_all_edges() const;

  bool operator==(const PixelGrid&) const = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> cells_;
};

const std::vector<MicroClass>& classes();
const MicroClass& micro_class(int id);
/// Letter label A..F for class ids 1..6.
char class_letter(int id);

/// Pixels whose center lies within half the (weighted) thickness of some rod,
/// measured periodically. `thickness` is a fraction of the cell width in (0, 1].
PixelGrid rasterize(const MicroClass& cls, double thickness, int resolution = kDefaultResolution);

/// Volume fraction of `rasterize(cls, thickness)` without building the grid.
double volume_fraction(const MicroClass& cls, double thickness, int resolution = kDefaultResolution);

struct ThicknessSolution {
  double thickness;
  double achieved_vf;
  /// False when pixel quantization leaves no thickness within kVfTolerance of the
  /// target; the closest achievable grid is returned in that case.
  bool within_tolerance;
};

double min_thickness(int resolution = kDefaultResolution);
double min_volume_fraction(const MicroClass& cls, int resolution = kDefaultResolution);

/// Bisection on thickness over [kMinRodPixels/resolution, 1].
ThicknessSolution solve_thickness(const MicroClass& cls, double target_vf,
                                  int resolution = kDefaultResolution);

struct LibrarySample {
  int class_id;
  double target_vf;
  double achieved_vf;
  double thickness;
  bool within_tolerance;
  PixelGrid grid;
};

/// Class-major, vf-minor. `vf_lo`..`vf_hi` uniformly spaced; one sample sits at vf_hi.
std::vector<LibrarySample> build_library(int samples_per_class, double vf_lo, double vf_hi,
                                         int resolution = kDefaultResolution);

std::vector<double> vf_targets(int samples_per_class, double vf_lo, double vf_hi);

}  // namespace mctopo::microlib
