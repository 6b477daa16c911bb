#include "mctopo/microlib.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "mctopo/error.hpp"

namespace mctopo::microlib {

PixelGrid::PixelGrid(int resolution, std::uint8_t fill)
    : n_(resolution), cells_(static_cast<std::size_t>(resolution) * resolution, fill ? 1 : 0) {}

std::size_t PixelGrid::solid_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double PixelGrid::volume_fraction() const {
  if (cells_.empty()) return 0.0;
  return static_cast<double>(solid_count()) / static_cast<double>(cells_.size());
}

PixelGrid PixelGrid::transposed() const {
  PixelGrid out(n_);
  for (int j = 0; j < n_; ++j)
    for (int i = 0; i < n_; ++i) out.set(j, i, solid(i, j));
  return out;
}

PixelGrid PixelGrid::rotated90() const {
  PixelGrid out(n_);
  for (int j = 0; j < n_; ++j)
    for (int i = 0; i < n_; ++i) out.set(n_ - 1 - j, i, solid(i, j));
  return out;
}

bool PixelGrid::connected() const {
  const std::size_t total = solid_count();
  if (total == 0) return false;
  std::vector<std::uint8_t> seen(cells_.size(), 0);
  std::vector<int> stack;
  const auto first = static_cast<int>(std::find(cells_.begin(), cells_.end(), 1) - cells_.begin());
  stack.push_back(first);
  seen[first] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    ++reached;
    const int i = p % n_, j = p / n_;
    const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (const auto& q : nb) {
      if (q[0] < 0 || q[0] >= n_ || q[1] < 0 || q[1] >= n_) continue;
      const int idx = q[1] * n_ + q[0];
      if (cells_[idx] && !seen[idx]) {
        seen[idx] = 1;
        stack.push_back(idx);
      }
    }
  }
  return reached == total;
}

bool PixelGrid::touches_all_edges() const {
  bool bottom = false, top = false, left = false, right = false;
  for (int k = 0; k < n_; ++k) {
    bottom |= solid(k, 0);
    top |= solid(k, n_ - 1);
    left |= solid(0, k);
    right |= solid(n_ - 1, k);
  }
  return bottom && top && left && right;
}

namespace {

std::vector<Rod> plus_rods() { return {{0.0, 0.5, 1.0, 0.5, 1}, {0.5, 0.0, 0.5, 1.0, 1}}; }

std::vector<Rod> cross_rods() { return {{0.0, 0.0, 1.0, 1.0, 1}, {0.0, 1.0, 1.0, 0.0, 1}}; }

std::vector<Rod> concat(std::vector<Rod> a, const std::vector<Rod>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<MicroClass> make_classes() {
  // Inset square ring joined to the cell edge midpoints.
  const std::vector<Rod> ring = {
      {0.25, 0.25, 0.75, 0.25, 1}, {0.75, 0.25, 0.75, 0.75, 1}, {0.75, 0.75, 0.25, 0.75, 1},
      {0.25, 0.75, 0.25, 0.25, 1}, {0.5, 0.0, 0.5, 0.25, 1},    {0.5, 0.75, 0.5, 1.0, 1},
      {0.0, 0.5, 0.25, 0.5, 1},    {0.75, 0.5, 1.0, 0.5, 1}};
  return {
      {1, "A", plus_rods(), Symmetry::Cubic},
      {2, "B", cross_rods(), Symmetry::Cubic},
      {3, "C", ring, Symmetry::Cubic},
      {4, "D", concat(plus_rods(), cross_rods()), Symmetry::Cubic},
      // Orthogonal cross with one rod doubled. With diagonals mixed in, the doubled
      // rod gains pixel rows alone at some thicknesses, which lowers C12 along the
      // vf sequence.
      {5, "E", {{0.0, 0.5, 1.0, 0.5, 2}, {0.5, 0.0, 0.5, 1.0, 1}}, Symmetry::XStiff},
      {6, "F", {{0.5, 0.0, 0.5, 1.0, 2}, {0.0, 0.5, 1.0, 0.5, 1}}, Symmetry::YStiff},
  };
}

// Squared distance (in doubled pixel units) from every pixel center to the nearest
// rod, divided by the rod weight squared, so that pixel p is solid at thickness t
// iff q[p] <= (t * n)^2. Coordinates are doubled so pixel centers and quarter-cell
// rod endpoints are integers; only the final division is inexact, and it is
// evaluated identically for mirror/rotation images, which keeps symmetric classes
// exactly symmetric.
struct DistanceField {
  std::vector<double> q;
  std::vector<double> sorted;
};

std::int64_t to_doubled(double unit_coord, int n) {
  const double v = unit_coord * 2.0 * n;
  const auto r = static_cast<std::int64_t>(std::llround(v));
  if (std::abs(v - static_cast<double>(r)) > 1e-9)
    throw Error(ErrorKind::InvalidInput, "rod endpoint not on the doubled pixel lattice");
  return r;
}

double segment_dist2(std::int64_t px, std::int64_t py, std::int64_t ax, std::int64_t ay,
                     std::int64_t bx, std::int64_t by) {
  const std::int64_t vx = bx - ax, vy = by - ay;
  const std::int64_t dx = px - ax, dy = py - ay;
  const std::int64_t vv = vx * vx + vy * vy;
  const std::int64_t dot = dx * vx + dy * vy;
  if (vv == 0 || dot <= 0) return static_cast<double>(dx * dx + dy * dy);
  if (dot >= vv) {
    const std::int64_t ex = px - bx, ey = py - by;
    return static_cast<double>(ex * ex + ey * ey);
  }
  const std::int64_t cross = dx * vy - dy * vx;
  return static_cast<double>(cross * cross) / static_cast<double>(vv);
}

std::shared_ptr<const DistanceField> compute_field(const MicroClass& cls, int n) {
  auto field = std::make_shared<DistanceField>();
  field->q.assign(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::infinity());
  const std::int64_t period = 2LL * n;
  for (const Rod& rod : cls.rods) {
    const std::int64_t ax = to_doubled(rod.x0, n), ay = to_doubled(rod.y0, n);
    const std::int64_t bx = to_doubled(rod.x1, n), by = to_doubled(rod.y1, n);
    const double w2 = static_cast<double>(rod.weight) * rod.weight;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int sy = -1; sy <= 1; ++sy)
          for (int sx = -1; sx <= 1; ++sx)
            best = std::min(best, segment_dist2(2 * i + 1 + sx * period, 2 * j + 1 + sy * period,
                                                ax, ay, bx, by));
        double& slot = field->q[static_cast<std::size_t>(j) * n + i];
        slot = std::min(slot, best / w2);
      }
    }
  }
  field->sorted = field->q;
  std::sort(field->sorted.begin(), field->sorted.end());
  return field;
}

std::shared_ptr<const DistanceField> distance_field(const MicroClass& cls, int n) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const DistanceField>> cache;
  if (n < 2 || n % 2 != 0) throw Error(ErrorKind::InvalidInput, "resolution must be even and >= 2");
  // Only the built-in classes are cached; ids of user-built classes may collide.
  const auto& builtin = classes();
  const bool cacheable = &cls >= builtin.data() && &cls < builtin.data() + builtin.size();
  if (!cacheable) return compute_field(cls, n);
  {
    std::lock_guard lock(mutex);
    auto it = cache.find({cls.id, n});
    if (it != cache.end()) return it->second;
  }
  auto field = compute_field(cls, n);
  std::lock_guard lock(mutex);
  return cache.try_emplace({cls.id, n}, std::move(field)).first->second;
}

void check_thickness(double thickness) {
  if (!(thickness > 0.0 && thickness <= 1.0))
    throw Error(ErrorKind::InvalidInput, "thickness must lie in (0, 1]");
}

double threshold(double thickness, int n) {
  const double tn = thickness * n;
  return tn * tn;
}

}  // namespace

const std::vector<MicroClass>& classes() {
  static const std::vector<MicroClass> all = make_classes();
  return all;
}

const MicroClass& micro_class(int id) {
  if (id < 1 || id > kClassCount) throw Error(ErrorKind::InvalidInput, "class id out of range 1..6");
  return classes()[static_cast<std::size_t>(id - 1)];
}

char class_letter(int id) { return static_cast<char>('A' + (id - 1)); }

PixelGrid rasterize(const MicroClass& cls, double thickness, int resolution) {
  check_thickness(thickness);
  const auto field = distance_field(cls, resolution);
  const double limit = threshold(thickness, resolution);
  PixelGrid grid(resolution);
  for (int j = 0; j < resolution; ++j)
    for (int i = 0; i < resolution; ++i)
      grid.set(i, j, field->q[static_cast<std::size_t>(j) * resolution + i] <= limit);
  return grid;
}

double volume_fraction(const MicroClass& cls, double thickness, int resolution) {
  check_thickness(thickness);
  const auto field = distance_field(cls, resolution);
  const auto count = std::upper_bound(field->sorted.begin(), field->sorted.end(),
                                      threshold(thickness, resolution)) -
                     field->sorted.begin();
  return static_cast<double>(count) / static_cast<double>(field->sorted.size());
}

double min_thickness(int resolution) { return static_cast<double>(kMinRodPixels) / resolution; }

double min_volume_fraction(const MicroClass& cls, int resolution) {
  return volume_fraction(cls, min_thickness(resolution), resolution);
}

ThicknessSolution solve_thickness(const MicroClass& cls, double target_vf, int resolution) {
  if (!(target_vf >= 0.0 && target_vf <= 1.0))
    throw Error(ErrorKind::InvalidInput, "target volume fraction must lie in [0, 1]");
  double lo = min_thickness(resolution);
  double hi = 1.0;
  const double vf_lo = volume_fraction(cls, lo, resolution);
  const double vf_hi = volume_fraction(cls, hi, resolution);
  if (target_vf < vf_lo - kVfTolerance || target_vf > vf_hi + kVfTolerance)
    throw Error(ErrorKind::InfeasibleTarget,
                "class " + cls.name + " cannot reach vf " + std::to_string(target_vf) +
                    " (reachable from " + std::to_string(vf_lo) + ")");
  if (target_vf >= vf_hi) return {hi, vf_hi, true};
  if (target_vf <= vf_lo) return {lo, vf_lo, std::abs(vf_lo - target_vf) <= kVfTolerance};

  // Invariant: vf(lo) < target <= vf(hi).
  double vf_at_lo = vf_lo, vf_at_hi = vf_hi;
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double vf = volume_fraction(cls, mid, resolution);
    if (vf == target_vf) return {mid, vf, true};
    if (vf < target_vf) {
      lo = mid;
      vf_at_lo = vf;
    } else {
      hi = mid;
      vf_at_hi = vf;
    }
  }
  const double err_lo = std::abs(vf_at_lo - target_vf);
  const double err_hi = std::abs(vf_at_hi - target_vf);
  if (err_lo < err_hi) return {lo, vf_at_lo, err_lo <= kVfTolerance + 1e-12};
  return {hi, vf_at_hi, err_hi <= kVfTolerance + 1e-12};
}

std::vector<double> vf_targets(int samples_per_class, double vf_lo, double vf_hi) {
  if (samples_per_class < 1) throw Error(ErrorKind::InvalidInput, "samples_per_class must be >= 1");
  if (!(vf_lo > 0.0 && vf_lo <= vf_hi && vf_hi <= 1.0))
    throw Error(ErrorKind::InvalidInput, "vf range must satisfy 0 < lo <= hi <= 1");
  std::vector<double> out;
  out.reserve(samples_per_class);
  if (samples_per_class == 1) {
    out.push_back(vf_hi);
    return out;
  }
  const double step = (vf_hi - vf_lo) / (samples_per_class - 1);
  for (int k = 0; k < samples_per_class; ++k)
    out.push_back(k + 1 == samples_per_class ? vf_hi : vf_lo + step * k);
  return out;
}

std::vector<LibrarySample> build_library(int samples_per_class, double vf_lo, double vf_hi,
                                         int resolution) {
  const auto targets = vf_targets(samples_per_class, vf_lo, vf_hi);
  std::vector<LibrarySample> out;
  out.reserve(targets.size() * classes().size());
  for (const MicroClass& cls : classes()) {
    for (double target : targets) {
      const ThicknessSolution sol = solve_thickness(cls, target, resolution);
      out.push_back({cls.id, target, sol.achieved_vf, sol.thickness, sol.within_tolerance,
                     rasterize(cls, sol.thickness, resolution)});
    }
  }
  return out;
}

}  // namespace mctopo::microlib
