#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "zoomrds/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Zooming times, pressure and equilibrium states for random dynamical systems"};
  zoomrds::cli::Options opt;
  std::uint64_t seed = 0;
  app.add_option("command", opt.command, "Command to run")
      ->required()
      ->check(CLI::IsMember(zoomrds::cli::commands()));
  app.add_option("--config", opt.config, "Experiment config (JSON)")->required();
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Master seed, overrides the config");
  app.add_flag("--strict", opt.strict, "Exit with code 3 when any warning was raised");
  app.add_option("--workers", opt.workers, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("!--no-timestamp", opt.timestamp, "Omit the timestamp from results.json");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : zoomrds::cli::kConfigError;
  }
  if (*seed_opt) opt.seed = seed;
  return zoomrds::cli::run(opt);
}
