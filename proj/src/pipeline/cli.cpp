#include <iostream>

#include "CLI11.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/pipeline/runner.hpp"

namespace tagfont::pipeline {

int run_cli(int argc, char** argv) {
  CLI::App app{"Tag-based font retrieval pipeline"};
  std::string subcommand;
  ConfigSources sources;
  std::string config_file, out;
  std::uint64_t seed = 0;
  bool print_config = false;
  std::string names;
  for (const auto& s : subcommands()) names += (names.empty() ? "" : ", ") + s;
  app.add_option("subcommand", subcommand, "One of: " + names)->required()->check(CLI::IsMember(subcommands()));
  auto* config_opt = app.add_option("--config", config_file, "JSON config layered over the defaults");
  auto* seed_opt = app.add_option("--seed", seed, "Run seed; every stage seed derives from it");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  app.add_option("--override", sources.overrides, "dotted.key=value, applied last (repeatable)");
  app.add_flag("--print-config", print_config, "Print the resolved config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  if (*config_opt) sources.config_file = config_file;
  if (*seed_opt) sources.seed = seed;
  if (*out_opt) sources.out = out;
  try {
    const auto config = resolve_config(sources);
    if (print_config) {
      std::cout << config.resolved_json() << "\n";
      return kExitOk;
    }
    Runner runner(config);
    runner.run(subcommand);
    return kExitOk;
  } catch (const MissingPrerequisite& e) {
    std::cerr << subcommand << ": " << e.what() << "\n";
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << subcommand << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace tagfont::pipeline
