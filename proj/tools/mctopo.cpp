#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mctopo/config.hpp"
#include "mctopo/error.hpp"
#include "mctopo/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace mctopo;
  CLI::App app{"mctopo: multi-class microstructure topology optimization pipeline"};
  app.set_version_flag("--version", std::string("mctopo ") + MCTOPO_VERSION);
  app.require_subcommand(1);

  struct Opts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
  };
  const std::map<std::string, std::pair<std::string, std::function<int(const config::RunConfig&, std::ostream&)>>> cmds{
      {"gen-library", {"Build the microstructure library and homogenize it", pipeline::gen_library}},
      {"fit", {"Fit the MR-LVGP surrogate and run the hold-out validation", pipeline::fit}},
      {"optimize", {"Run the two-stage multi-class topology optimization", pipeline::optimize}},
      {"render", {"Render structure, class and density images from a field CSV", pipeline::render}},
  };
  std::map<std::string, Opts> opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, cmd] : cmds) {
    auto* sub = app.add_subcommand(name, cmd.first);
    auto& o = opts[name];
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed for all randomness (overrides the config)");
    sub->add_option("--out", o.out, "Output directory (overrides the config)");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kExitError;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    const auto& o = opts[name];
    try {
      const auto cfg = config::load(o.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.config),
                                    o.seed, o.out);
      return cmds.at(name).second(cfg, std::cerr);
    } catch (const Error& e) {
      std::cerr << "mctopo " << name << ": error: " << e.what() << "\n";
      return pipeline::kExitError;
    } catch (const std::exception& e) {
      std::cerr << "mctopo " << name << ": unexpected error: " << e.what() << "\n";
      return pipeline::kExitError;
    }
  }
  return pipeline::kExitError;
}
