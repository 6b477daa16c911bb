#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "mctopo/io.hpp"

using namespace mctopo;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "mctopo_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(MCTOPO_CLI) + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string log_text() { return io::read_file(kRoot / "last.log"); }

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = kRoot / name;
  io::write_file_atomic(p, body);
  return p;
}

const char* kSmall = R"({
  "seed": 11,
  "gen_library": {"samples_per_class": 4, "resolution": 40, "vf_lo": 0.3, "vf_hi": 0.9},
  "fit": {"starts": 2, "repetitions": 3},
  "optimize": {"problem": "cantilever", "nx": 12, "ny": 6, "mode": "both", "vmax": 0.5, "rho_min": 0.3, "rho_max": 0.9, "max_iter": 40,
               "resolution": 20},
  "render": {"resolution": 20, "map_scale": 4}
})";

std::size_t distinct_colors(const io::Image& img) {
  std::set<std::array<std::uint8_t, 3>> colors;
  for (std::size_t k = 0; k + 2 < img.pixels.size(); k += 3) colors.insert({img.pixels[k], img.pixels[k + 1], img.pixels[k + 2]});
  return colors.size();
}

}  // namespace

TEST_CASE("usage errors") {
  fs::create_directories(kRoot);
  CHECK(run("--version") == 0);
  CHECK(log_text().find("mctopo ") == 0);
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("fit --config /nonexistent.json") == 1);
  const auto bad = write_config("bad.json", R"({"optimize": {"nsx": 3}})");
  CHECK(run("optimize --config " + bad.string()) == 1);
  CHECK(log_text().find("nsx") != std::string::npos);
  // missing inputs are reported, not crashed on
  CHECK(run("fit --out " + (kRoot / "empty").string()) == 1);
  CHECK(run("render --out " + (kRoot / "empty").string()) == 1);
}

TEST_CASE("pipeline end to end") {
  fs::remove_all(kRoot / "a");
  fs::remove_all(kRoot / "b");
  fs::create_directories(kRoot);
  const auto cfg = write_config("small.json", kSmall);
  const std::string a = " --config " + cfg.string() + " --out " + (kRoot / "a").string();
  const std::string b = " --config " + cfg.string() + " --out " + (kRoot / "b").string();

  REQUIRE(run("gen-library" + a) == 0);
  const auto manifest = io::read_csv(kRoot / "a" / "manifest.csv");
  CHECK(manifest.rows.size() == 24);
  CHECK(manifest.meta.at("seed") == "11");
  CHECK(manifest.meta.at("command") == "gen-library");
  const auto dataset = io::read_csv(kRoot / "a" / "dataset.csv");
  CHECK(dataset.rows.size() == 24);
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) CHECK(dataset.number(r, "C11") > 0.0);
  CHECK(fs::exists(kRoot / "a" / "grids" / "class1_0.pgm"));

  REQUIRE(run("fit" + a) == 0);
  CHECK(fs::exists(kRoot / "a" / "model.json"));
  const auto val = io::read_csv(kRoot / "a" / "validation.csv");
  REQUIRE(val.rows.size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(val.number(r, "mse_mean") >= 0.0);
    CHECK(val.number(r, "mse_variance") >= 0.0);
  }
  const auto runs = io::read_csv(kRoot / "a" / "validation_runs.csv");
  REQUIRE(runs.rows.size() == 3);
  std::set<std::string> seeds;
  for (const auto& row : runs.rows) seeds.insert(row[static_cast<std::size_t>(runs.column("seed"))]);
  CHECK(seeds.size() == 3);
  CHECK(io::read_csv(kRoot / "a" / "latent.csv").rows.size() == 6);

  const int oc = run("optimize" + a);
  CHECK((oc == 0 || oc == 2));
  for (const char* f : {"trace_single.csv", "trace_stage1.csv", "trace_stage2.csv", "field.csv", "field.vtk",
                        "field_single.csv", "field_stage1.csv", "class_usage.csv", "comparison.csv",
                        "latent_scatter.csv", "summary.json", "multi_structure.png", "multi_classes.png",
                        "single_structure.png"})
    CHECK_MESSAGE(fs::exists(kRoot / "a" / f), f);
  const auto usage = io::read_csv(kRoot / "a" / "class_usage.csv");
  double pct = 0.0;
  for (std::size_t r = 0; r < usage.rows.size(); ++r) pct += usage.number(r, "percent");
  CHECK(pct == doctest::Approx(100.0).epsilon(1e-9));
  int used = 0;
  for (std::size_t r = 0; r < usage.rows.size(); ++r) used += usage.number(r, "elements") > 0;
  CHECK(distinct_colors(io::read_png(kRoot / "a" / "multi_classes.png")) == static_cast<std::size_t>(used));
  const auto structure = io::read_png(kRoot / "a" / "multi_structure.png");
  CHECK(structure.width == 12 * 20);
  CHECK(structure.height == 6 * 20);

  // same config and seed in a second directory: identical bytes
  REQUIRE(run("gen-library" + b) == 0);
  REQUIRE(run("fit" + b) == 0);
  CHECK(run("optimize" + b) == oc);
  for (const auto& e : fs::recursive_directory_iterator(kRoot / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), kRoot / "a");
    CHECK_MESSAGE(io::read_file(e.path()) == io::read_file(kRoot / "b" / rel), rel.string());
  }

  // a different seed changes the fit
  const std::string c = " --config " + cfg.string() + " --seed 12 --out " + (kRoot / "c").string();
  fs::remove_all(kRoot / "c");
  fs::create_directories(kRoot / "c");
  fs::copy_file(kRoot / "a" / "dataset.csv", kRoot / "c" / "dataset.csv");
  REQUIRE(run("fit" + c) == 0);
  CHECK(io::read_file(kRoot / "c" / "validation_runs.csv") != io::read_file(kRoot / "a" / "validation_runs.csv"));

  // render re-creates the optimize images from the field file
  const auto before = io::read_file(kRoot / "a" / "multi_classes.png");
  REQUIRE(run("render" + a) == 0);
  const auto r1 = io::read_file(kRoot / "a" / "field_classes.png");
  REQUIRE(run("render" + a) == 0);
  CHECK(io::read_file(kRoot / "a" / "field_classes.png") == r1);
  CHECK(io::read_png(kRoot / "a" / "field_classes.png").pixels == io::read_png(kRoot / "a" / "multi_classes.png").pixels);
  CHECK(io::read_file(kRoot / "a" / "multi_classes.png") == before);
}

TEST_CASE("render a single element") {
  const fs::path d = kRoot / "one";
  fs::remove_all(d);
  fs::create_directories(d);
  io::CsvWriter w({"test", "0", 0}, {"element", "i", "j", "active", "class", "rho_phys"});
  w.row({"0", "0", "0", "1", "1", "0.19"});
  w.save(d / "field.csv");
  REQUIRE(run("render --out " + d.string()) == 0);
  const auto img = io::read_png(d / "field_structure.png");
  CHECK(img.width == 100);
  CHECK(img.height == 100);
  std::size_t solid = 0;
  for (std::size_t k = 0; k < img.pixels.size(); k += static_cast<std::size_t>(img.channels)) solid += img.pixels[k] < 128;
  CHECK(std::abs(static_cast<double>(solid) / 1e4 - 0.19) <= 0.01);
  CHECK(distinct_colors(io::read_png(d / "field_classes.png")) == 1);
}
