#include <CLI11.hpp>
#include <fmt/format.h>

#include <exception>
#include <thread>

#include "npns/config.hpp"
#include "npns/experiment.hpp"
#include "npns/manifest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Nernst-Planck-Navier-Stokes experiments on the periodic square"};
  app.set_version_flag("--version", std::string(npns::kCodeVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string output;
  int workers = 1;
  bool resume = false;
  bool quiet = false;
  long max_jobs = -1;

  const char* names[] = {"simulate", "verify", "pullback", "sweep", "convergence"};
  const char* help[] = {
      "integrate one trajectory and store diagnostics and states",
      "run the energy and absorption checks",
      "build one pullback cloud",
      "compare clouds for decreasing noise against the noiseless cloud",
      "pathwise convergence as the noise vanishes",
  };
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("-c,--config", config_path, "TOML configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output, "output directory (overrides the config)");
    sub->add_option("-w,--workers", workers, "worker threads")->check(CLI::Range(1, 1024));
    sub->add_flag("--resume", resume, "skip jobs finished by an earlier run of the same config");
    sub->add_flag("-q,--quiet", quiet, "no progress on stderr");
    sub->add_option("--max-jobs", max_jobs, "stop after this many new jobs")->group("");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? npns::kExitSuccess : npns::kExitUsage;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    npns::RunConfig config = npns::load_config(config_path);
    if (kind != npns::to_string(config.kind)) {
      fmt::print(stderr, "note: config kind '{}' overridden by subcommand '{}'\n", npns::to_string(config.kind), kind);
      for (int i = 0; i < 5; ++i)
        if (kind == names[i]) config.kind = static_cast<npns::Kind>(i);
    }
    npns::RunOptions options;
    options.output = output;
    options.workers = workers;
    options.resume = resume;
    options.max_jobs = max_jobs;
    options.quiet = quiet;
    const npns::RunOutcome outcome = npns::run_experiment(config, options);
    for (const auto& [name, status] : outcome.checks) fmt::print("{:<40} {}\n", name, status);
    if (!outcome.complete) fmt::print("incomplete: rerun with --resume to finish {}\n", outcome.output.string());
    return outcome.exit_code;
  } catch (const npns::ConfigError& e) {
    fmt::print(stderr, "configuration error ({}):\n", config_path);
    for (const auto& p : e.problems) fmt::print(stderr, "  - {}\n", p);
    return npns::kExitUsage;
  } catch (const npns::ChecksumError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return npns::kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return npns::kExitCheckFailure;
  }
}
