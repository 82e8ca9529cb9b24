#include "stemnav/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace stemnav;
  CLI::App app{"Tethered multi-drone navigation simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  int verbosity = 0;
  bool quiet = false;
  std::string table_cache = default_table_cache().string();
  app.add_flag("-v,--verbose", verbosity, "Print one line per planner step");
  app.add_flag("-q,--quiet", quiet, "Print nothing on success");
  app.add_option("--table-cache", table_cache, "Catenary table cache directory (env STEMNAV_TABLE_CACHE)");

  RunOptions run_opts;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario");
  run_cmd->add_option("scenario", run_opts.scenario, "Scenario file")->required();
  run_cmd->add_option("-o,--out", run_opts.output_dir, "Output directory for the log and summary");
  auto* run_seed_opt = run_cmd->add_option("--seed", run_seed, "Override the scenario seed");
  run_cmd->add_option("--set", run_opts.overrides, "Override a field: dotted.path=value")->allow_extra_args(false);

  BuildTableOptions table_opts;
  std::string table_scenario;
  auto* table_cmd = app.add_subcommand("build-table", "Precompute the catenary table");
  auto* table_scenario_opt =
      table_cmd->add_option("--scenario", table_scenario, "Take tether, grid and relax settings from a scenario");
  table_cmd->add_option("--set", table_opts.overrides, "Override a scenario field")->allow_extra_args(false);
  auto* table_out_opt = table_cmd->add_option("-o,--out", table_opts.output_dir, "Output directory");

  ReplayOptions replay_opts;
  std::uint64_t replay_seed = 0;
  auto* replay_cmd = app.add_subcommand("replay-check", "Re-run a scenario and compare with a stored log");
  replay_cmd->add_option("log", replay_opts.log, "Stored run log")->required();
  replay_cmd->add_option("scenario", replay_opts.scenario, "Scenario file")->required();
  auto* replay_seed_opt = replay_cmd->add_option("--seed", replay_seed, "Override the scenario seed");
  replay_cmd->add_option("--set", replay_opts.overrides, "Override a field")->allow_extra_args(false);

  BatchOptions batch_opts;
  auto* batch_cmd = app.add_subcommand("batch", "Run every scenario of a manifest");
  batch_cmd->add_option("manifest", batch_opts.manifest, "Batch manifest")->required();
  batch_cmd->add_option("-o,--out", batch_opts.output_dir, "Output directory");
  batch_cmd->add_option("-j,--jobs", batch_opts.jobs, "Concurrent runs (0: one per core)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitConfig;
  }
  const int level = quiet ? -1 : verbosity;

  if (*run_cmd) {
    run_opts.table_cache = table_cache;
    run_opts.verbosity = level;
    if (*run_seed_opt) run_opts.seed = run_seed;
    return cmd_run(run_opts, std::cout, std::cerr);
  }
  if (*table_cmd) {
    if (*table_scenario_opt) table_opts.scenario = table_scenario;
    if (!*table_out_opt) table_opts.output_dir = table_cache;
    return cmd_build_table(table_opts, std::cout, std::cerr);
  }
  if (*replay_cmd) {
    replay_opts.table_cache = table_cache;
    if (*replay_seed_opt) replay_opts.seed = replay_seed;
    return cmd_replay_check(replay_opts, std::cout, std::cerr);
  }
  batch_opts.table_cache = table_cache;
  batch_opts.verbosity = level;
  return cmd_batch(batch_opts, std::cout, std::cerr);
}
