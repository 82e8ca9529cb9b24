#pragma once

// Subcommands of the stemnav executable, callable in-process.

#include "stemnav/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stemnav {

enum ExitCode : int {
  kExitSuccess = 0,
  kExitMismatch = 1,  ///< replay-check difference, or a batch with mixed outcomes
  kExitCollision = 2,
  kExitTimeout = 3,
  kExitConfig = 4,
  kExitInternal = 5,
};

int exit_code(Outcome outcome);

struct RunOptions {
  std::filesystem::path scenario;
  std::filesystem::path output_dir = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::filesystem::path table_cache = default_table_cache();
  int verbosity = 0;  ///< <0 quiet, 1 one line per planner step
};

/// Loads a scenario with the seed override applied last.
ScenarioSpec load_with_options(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                               std::optional<std::uint64_t> seed);

/// Human-readable multi-line summary.
std::string format_summary(const RunLog& log);

/// Runs one scenario; writes <out>/<name>.jsonl and <out>/<name>.summary.txt.
/// Nothing is written on a configuration error.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct BuildTableOptions {
  std::optional<std::filesystem::path> scenario;  ///< source of tether, grid and relax settings
  std::vector<std::string> overrides;
  std::filesystem::path output_dir = default_table_cache();
};

/// Builds or reuses the catenary table; nonzero with the failed nodes listed
/// when some relaxations did not converge.
int cmd_build_table(const BuildTableOptions& options, std::ostream& out, std::ostream& err);

struct ReplayOptions {
  std::filesystem::path log;
  std::filesystem::path scenario;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::filesystem::path table_cache = default_table_cache();
};

/// Re-runs the scenario and compares with the stored log byte by byte.
int cmd_replay_check(const ReplayOptions& options, std::ostream& out, std::ostream& err);

struct BatchOptions {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = ".";
  std::filesystem::path table_cache = default_table_cache();
  unsigned jobs = 0;  ///< 0: hardware concurrency
  int verbosity = 0;
};

/**
 * @brief Runs every entry of a manifest concurrently.
 *
 * The manifest is {"runs": [{"scenario": path, "seed": n, "set": [..],
 * "name": s}, ..]}; relative paths are resolved against the manifest. Entry i
 * logs to <out>/<i>_<name>.jsonl. Returns 0 when every run succeeds, the
 * common code when they all end alike, kExitMismatch otherwise.
 */
int cmd_batch(const BatchOptions& options, std::ostream& out, std::ostream& err);

}  // namespace stemnav
