#include "mctopo/io.hpp"

#include <png.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "mctopo/error.hpp"

namespace mctopo::io {

std::vector<std::pair<std::string, std::string>> Meta::entries() const {
  return {{"tool", std::string("mctopo ") + MCTOPO_VERSION},
          {"command", command},
          {"config_hash", config_hash},
          {"seed", std::to_string(seed)}};
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory " + path.parent_path().string());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename into " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const Meta& meta, std::vector<std::string> columns) : ncols_(columns.size()) {
  for (const auto& [k, v] : meta.entries()) out_ += "# " + k + "=" + v + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out_ += (i ? "," : "") + columns[i];
  out_ += "\n";
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_) throw Error(ErrorKind::InvalidInput, "CSV row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) out_ += (i ? "," : "") + cells[i];
  out_ += "\n";
  return *this;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw Error(ErrorKind::Io, "CSV is missing column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& cell = rows.at(row).at(static_cast<std::size_t>(column(name)));
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw Error(ErrorKind::Io, "not a number in column '" + name + "': '" + cell + "'");
  return v;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        t.meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header) {
      t.columns = split(line);
      header = true;
      continue;
    }
    auto cells = split(line);
    if (cells.size() != t.columns.size()) throw Error(ErrorKind::Io, "ragged CSV row: " + line);
    t.rows.push_back(std::move(cells));
  }
  if (!header) throw Error(ErrorKind::Io, "CSV has no header row");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

std::string encode_pgm(const microlib::PixelGrid& grid, const Meta& meta) {
  const int n = grid.resolution();
  std::string out = "P5\n";
  for (const auto& [k, v] : meta.entries()) out += "# " + k + "=" + v + "\n";
  out += std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  for (int r = n - 1; r >= 0; --r)
    for (int i = 0; i < n; ++i) out.push_back(grid.solid(i, r) ? static_cast<char>(255) : 0);
  return out;
}

void write_pgm(const std::filesystem::path& path, const microlib::PixelGrid& grid, const Meta& meta) {
  write_file_atomic(path, encode_pgm(grid, meta));
}

microlib::PixelGrid read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (token() != "P5") throw Error(ErrorKind::Io, path.string() + " is not a binary PGM");
  const int w = std::stoi(token()), h = std::stoi(token()), maxval = std::stoi(token());
  ++pos;  // single whitespace before raster
  if (w != h || maxval != 255 || bytes.size() < pos + static_cast<std::size_t>(w) * h)
    throw Error(ErrorKind::Io, path.string() + ": unsupported or truncated PGM");
  microlib::PixelGrid grid(w);
  for (int r = 0; r < h; ++r)
    for (int i = 0; i < w; ++i)
      grid.set(i, h - 1 - r, static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(r) * w + i]) >= 128);
  return grid;
}

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

void no_flush(png_structp) {}

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

// libpng reports errors by longjmp; keep these frames free of objects with destructors.
bool png_encode(const Image& image, png_text* text, int ntext, png_bytep* rows, std::string* out) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, out, append_bytes, no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_text(png, info, text, ntext);
  png_set_rows(png, info, rows);
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

bool png_decode(ReadCursor* cur, Image* img) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, cur, read_bytes);
  png_read_png(png, info, PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_STRIP_ALPHA, nullptr);
  img->width = static_cast<int>(png_get_image_width(png, info));
  img->height = static_cast<int>(png_get_image_height(png, info));
  img->channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  img->pixels.resize(static_cast<std::size_t>(img->width) * img->height * img->channels);
  for (int y = 0; y < img->height; ++y)
    std::memcpy(img->pixels.data() + static_cast<std::size_t>(y) * img->width * img->channels, rows[y],
                static_cast<std::size_t>(img->width) * img->channels);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image, const Meta& meta) {
  if (image.width <= 0 || image.height <= 0 || (image.channels != 1 && image.channels != 3) ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw Error(ErrorKind::InvalidInput, "bad image dimensions");
  auto entries = meta.entries();
  std::vector<png_text> text(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    text[i] = png_text{};
    text[i].compression = PNG_TEXT_COMPRESSION_NONE;
    text[i].key = entries[i].first.data();
    text[i].text = entries[i].second.data();
    text[i].text_length = entries[i].second.size();
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
        image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
  std::string encoded;
  if (!png_encode(image, text.data(), static_cast<int>(text.size()), rows.data(), &encoded))
    throw Error(ErrorKind::Io, "PNG encoding failed for " + path.string());
  write_file_atomic(path, encoded);
}

Image read_png(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8))
    throw Error(ErrorKind::Io, path.string() + " is not a PNG");
  ReadCursor cur{&bytes, 0};
  Image img;
  if (!png_decode(&cur, &img)) throw Error(ErrorKind::Io, "PNG decoding failed for " + path.string());
  return img;
}

void write_vtk(const std::filesystem::path& path, int nx, int ny, const std::vector<VtkField>& fields,
               const Meta& meta) {
  std::string out = "# vtk DataFile Version 3.0\n";
  std::string title;
  for (const auto& [k, v] : meta.entries()) title += (title.empty() ? "" : " ") + k + "=" + v;
  out += title + "\nASCII\nDATASET STRUCTURED_POINTS\n";
  out += "DIMENSIONS " + std::to_string(nx + 1) + " " + std::to_string(ny + 1) + " 1\n";
  out += "ORIGIN 0 0 0\nSPACING 1 1 1\n";
  out += "CELL_DATA " + std::to_string(nx * ny) + "\n";
  for (const auto& f : fields) {
    if (f.values.size() != static_cast<std::size_t>(nx) * ny)
      throw Error(ErrorKind::InvalidInput, "VTK field '" + f.name + "' has the wrong size");
    out += "SCALARS " + f.name + " double 1\nLOOKUP_TABLE default\n";
    for (double v : f.values) out += format_double(v) + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace mctopo::io
