// SPDX-License-Identifier: Apache-2.0
// Command-line front end: `run` and `design-only`.

#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvimg/pipeline.hpp"

int main(int argc, char **argv) {
  CLI::App app{"Multi-view NLOS imaging simulator"};
  app.set_version_flag("--version", std::string(mvimg::kVersion));
  app.require_subcommand(1);

  std::string run_config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> sweeps;
  unsigned threads = 1;
  bool strict = false;
  std::vector<std::string> emit{"csv", "pgm", "json"};

  auto *run = app.add_subcommand("run", "simulate acquisition and form the image");
  run->add_option("--config", run_config, "configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--seed", seed, "noise seed");
  run->add_option("--mode", mode, "multiview | multiview-static | mirror")
      ->check(CLI::IsMember({"multiview", "multiview-static", "mirror"}));
  run->add_option("--sweeps", sweeps, "number of BS sweeps")->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "worker threads (0 = all cores)");
  run->add_flag("--strict", strict, "treat warnings as errors");
  run->add_option("--emit", emit, "comma list of csv,pgm,json,plan,cube")
      ->delimiter(',')
      ->check(CLI::IsMember({"csv", "pgm", "json", "plan", "cube"}));

  std::string design_config;
  std::optional<std::string> design_out;
  bool design_strict = false;
  auto *design = app.add_subcommand("design-only", "print the design report");
  design->add_option("--config", design_config, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  design->add_option("--out", design_out, "write the report to this file instead of stdout");
  design->add_flag("--strict", design_strict, "treat warnings as errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mvimg::kExitInvalid;
  }

  if (*run) {
    mvimg::RunOverrides o;
    o.seed = seed;
    if (mode) o.mode = mvimg::parse_mode(*mode);
    o.sweeps = sweeps;
    o.threads = threads;
    o.strict = strict;
    o.emit = std::set<std::string>(emit.begin(), emit.end());
    return mvimg::run_command(run_config, out_dir, o, std::cout, std::cerr);
  }
  std::optional<mvimg::fs::path> target;
  if (design_out) target = *design_out;
  return mvimg::design_only_command(design_config, design_strict, target, std::cout, std::cerr);
}
