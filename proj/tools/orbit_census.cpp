#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "orbit_census/experiment.hpp"

namespace oc = orbit_census;

int main(int argc, char** argv) {
  CLI::App app{"Periodic-orbit census for subshifts of finite type and open billiards"};
  app.require_subcommand(1);
  unsigned workers = 1;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", out, "Output directory (run: overrides the config output path's directory)");
  app.add_option("--seed", seed, "Seed for randomized cross-checks");

  auto* run = app.add_subcommand("run", "Run one JSON experiment config");
  std::string config_path;
  run->add_option("config", config_path, "Config file")->required();

  auto* reproduce = app.add_subcommand("reproduce", "Run a bundled reproduction suite");
  std::string suite;
  reproduce->add_option("suite", suite, "theorem1, theorem2 or theorem4")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : oc::kExitConfig;
  }

  oc::RunOptions opts;
  opts.workers = workers;
  opts.seed = seed;
  try {
    if (run->parsed()) {
      const std::filesystem::path cfg(config_path);
      oc::json config;
      try {
        config = oc::json::parse(oc::detail::read_file(cfg));
      } catch (const oc::json::parse_error& e) {
        std::cerr << "ConfigError: " << config_path << ": " << e.what() << "\n";
        return oc::kExitConfig;
      }
      if (!out.empty() && config.is_object() && config.contains("output") && config["output"].contains("path")) {
        const std::filesystem::path name = std::filesystem::path(config["output"]["path"].get<std::string>()).filename();
        opts.output = (std::filesystem::path(out) / name).string();
      }
      const auto result = oc::run_experiment(config, cfg.parent_path(), opts);
      for (const auto& f : result.files) std::cout << f << "\n";
    } else {
      const auto result = oc::reproduce_suite(suite, out.empty() ? std::filesystem::path(suite) : std::filesystem::path(out), opts);
      for (const auto& f : result.files) std::cout << f << "\n";
    }
  } catch (const oc::Error& e) {
    std::cerr << e.what() << "\n";
    return oc::exit_code_for(e.kind());
  } catch (const oc::json::exception& e) {
    std::cerr << "ConfigError: " << e.what() << "\n";
    return oc::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return oc::kExitFailure;
  }
  return oc::kExitOk;
}
