#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mctopo/microlib.hpp"

namespace mctopo::io {

/// Provenance stamped onto every emitted file.
struct Meta {
  std::string command;
  std::string config_hash;  // hex FNV-1a of the canonical config text
  std::uint64_t seed = 0;

  std::vector<std::pair<std::string, std::string>> entries() const;
};

std::string fnv1a_hex(const std::string& text);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// CSV with a leading `# key=value` comment block.
class CsvWriter {
 public:
  CsvWriter(const Meta& meta, std::vector<std::string> columns);
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const { return out_; }
  void save(const std::filesystem::path& path) const { write_file_atomic(path, out_); }

 private:
  std::size_t ncols_;
  std::string out_;
};

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws Io when missing
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// Binary PGM (P5), 0 = void, 255 = solid, top image row = largest y.
std::string encode_pgm(const microlib::PixelGrid& grid, const Meta& meta);
void write_pgm(const std::filesystem::path& path, const microlib::PixelGrid& grid, const Meta& meta);
microlib::PixelGrid read_pgm(const std::filesystem::path& path);

/// 8-bit image buffer with rows top-to-bottom; `channels` 1 (gray) or 3 (RGB).
struct Image {
  int width = 0, height = 0, channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}
  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
};

/// PNG with the metadata entries as tEXt chunks; no timestamps, so output is reproducible.
void write_png(const std::filesystem::path& path, const Image& image, const Meta& meta);
Image read_png(const std::filesystem::path& path);

/// Legacy VTK structured-points file with cell scalars.
struct VtkField {
  std::string name;
  std::vector<double> values;  // nx * ny, row-major from y = 0
};
void write_vtk(const std::filesystem::path& path, int nx, int ny, const std::vector<VtkField>& fields,
               const Meta& meta);

}  // namespace mctopo::io
