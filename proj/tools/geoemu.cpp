#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geoemu/commands.hpp"
#include "geoemu/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"geoemu: gridded scalar-field emulation benchmark"};
  app.require_subcommand(1);

  // Only one subcommand runs per invocation, so they can share one option set.
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  std::vector<std::string> names = {"synth",    "train", "evaluate", "forecast",
                                    "eof",      "plot",  "suite"};
  for (const auto& name : names) {
    auto* sc = app.add_subcommand(name);
    sc->add_option("--config", config_path, "JSON run configuration")->required();
    sc->add_option("--set", sets, "dotted-key override, e.g. training.batch_size=8");
    sc->add_option("--out", out_dir, "output directory");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& name : names) {
      if (!app.get_subcommand(name)->parsed()) continue;
      geoemu::cfg::json user = geoemu::cfg::load_file(config_path);
      geoemu::cfg::json resolved = geoemu::cfg::resolve(user);
      geoemu::cfg::apply_overrides(resolved, sets);
      geoemu::cmd::run_command(name, resolved, out_dir);
      return 0;
    }
    std::fprintf(stderr, "error: validation: no subcommand selected\n");
    return 1;
  } catch (const geoemu::Error& e) {
    bool validation = e.kind() == geoemu::ErrorKind::validation;
    std::fprintf(stderr, "error: %s: %s\n",
                 validation ? "validation" : "runtime", e.what());
    return validation ? 1 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 2;
  }
}
