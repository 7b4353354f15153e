// chemolab command line: run <config>, estimate-constants <config>, report <run-dir>.
//
// Exit codes: 0 success, 1 validation error, 2 runtime or solver failure,
// 3 failed acceptance assertion.

#include <exception>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "chemolab/error.hpp"
#include "chemolab/scenario.hpp"

namespace {

using chemolab::ScenarioResult;

void print_summary(const ScenarioResult& r) {
  fmt::print("scenario {} -> {}\n", chemolab::to_string(r.config.scenario), r.config.output_dir.string());
  for (const auto& c : r.checks)
    fmt::print("  {:<20} {}  value {:.6g}  limit {:.6g}\n", c.name, c.pass ? "PASS" : "FAIL", c.value, c.limit);
  if (r.run_error) {
    try {
      std::rethrow_exception(r.run_error);
    } catch (const std::exception& e) {
      fmt::print(stderr, "run failed: {}\n", e.what());
    }
  }
}

int run_verb(const std::string& config_path, const std::string& output_override, bool constants_only) {
  chemolab::Config cfg = chemolab::Config::load(config_path);
  chemolab::RunConfig rc = chemolab::parse_run_config(cfg);
  if (!output_override.empty()) rc.output_dir = output_override;
  const ScenarioResult r = constants_only ? chemolab::estimate_constants(rc) : chemolab::run_scenario(rc);
  print_summary(r);
  return r.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chemolab: chemotaxis-fluid simulations with smallness certificates"};
  app.require_subcommand(1);

  std::string config_path, output_dir, run_dir;
  auto* run = app.add_subcommand("run", "run the scenario described by a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("-o,--output", output_dir, "output directory (overrides output.dir)");

  auto* est = app.add_subcommand("estimate-constants", "estimate and persist the inequality constants");
  est->add_option("config", config_path, "config file")->required();
  est->add_option("-o,--output", output_dir, "output directory (overrides output.dir)");

  auto* rep = app.add_subcommand("report", "recompute report.txt for a run directory");
  rep->add_option("run-dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_verb(config_path, output_dir, false);
    if (*est) return run_verb(config_path, output_dir, true);
    std::cout << chemolab::report_run_dir(run_dir);
    return 0;
  } catch (const chemolab::ValidationError& e) {
    fmt::print(stderr, "validation error: {}\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
}
