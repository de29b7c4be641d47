#pragma once

// Subcommands: each reads a validated RunConfig, writes its files under
// the output directory and finishes with manifest.json.

#include <filesystem>
#include <map>
#include <string>

#include "npns/config.hpp"

namespace npns {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitUsage = 2;

struct RunOptions {
  std::filesystem::path output;  // overrides config.output when non-empty
  int workers = 1;
  bool resume = false;
  long max_jobs = -1;            // stop after this many new jobs (testing interrupts)
  bool quiet = false;
};

struct RunOutcome {
  int exit_code = kExitSuccess;
  bool complete = true;
  std::map<std::string, std::string> checks;
  std::filesystem::path output;
};

RunOutcome run_experiment(const RunConfig& config, const RunOptions& options);

RunOutcome cmd_simulate(const RunConfig& config, const RunOptions& options);
RunOutcome cmd_verify(const RunConfig& config, const RunOptions& options);
RunOutcome cmd_pullback(const RunConfig& config, const RunOptions& options);
RunOutcome cmd_sweep(const RunConfig& config, const RunOptions& options);
RunOutcome cmd_convergence(const RunConfig& config, const RunOptions& options);

}  // namespace npns
