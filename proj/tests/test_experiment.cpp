#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "npns/diagnostics.hpp"
#include "npns/experiment.hpp"
#include "npns/manifest.hpp"

using namespace npns;
namespace fs = std::filesystem;

namespace {

fs::path named(const std::string& name) { return fs::temp_directory_path() / ("npns_test_experiment_" + name); }

fs::path scratch(const std::string& name) {
  const fs::path p = named(name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

RunOptions quiet(const fs::path& out, int workers = 1) {
  RunOptions o;
  o.output = out;
  o.workers = workers;
  o.quiet = true;
  return o;
}

// Every result file except the manifest, which carries wall-clock times.
std::map<std::string, std::string> result_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : index_files(dir)) out[e.path] = e.sha256;
  return out;
}

const char* kMinimal = R"(
[grid]
n = 8
[integrator]
dt = 1e-2
t_end = 0.1
[initial]
count = 3
)";

const char* kCloud = R"(
kind = "sweep"
[grid]
n = 8
[noise]
epsilon = 0.2
[integrator]
dt = 2e-2
[initial]
count = 3
[pullback]
t0_levels = [-0.5, -1.0]
[sweep]
epsilons = [0.4, 0.1]
)";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NPNS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("minimal simulate run: n = 8, 10 steps") {
  const fs::path out = scratch("minimal");
  const RunOutcome r = run_experiment(parse_config(kMinimal), quiet(out));
  CHECK(r.exit_code == kExitSuccess);
  CHECK(r.complete);
  const RunManifest m = read_manifest(out);
  CHECK(m.complete);
  CHECK(m.kind == "simulate");
  CHECK_NOTHROW(verify_checksums(out, m));
  std::ifstream is(out / "diagnostics.csv");
  const auto diag = read_diagnostics_csv(is);
  CHECK(diag.size() == 11);
  CHECK(diag.back().time == doctest::Approx(0.1));
  CHECK(fs::exists(out / "final_state.bin"));
  CHECK(fs::exists(out / "path.csv"));
}

TEST_CASE("snapshots are named by step") {
  const fs::path out = scratch("snapshots");
  RunConfig c = parse_config(kMinimal);
  c.integrator.snapshot_stride = 5;
  run_experiment(c, quiet(out));
  CHECK(fs::exists(out / "snapshots" / "step_00000000.bin"));
  CHECK(fs::exists(out / "snapshots" / "step_00000005.bin"));
  CHECK(fs::exists(out / "snapshots" / "step_00000010.bin"));
}

TEST_CASE("eps = 0 and eps = 1e-16 differ only below 1e-12") {
  RunConfig c = parse_config(kMinimal);
  c.t_end = 1.0;
  c.epsilon = 0.0;
  run_experiment(c, quiet(scratch("eps0")));
  c.epsilon = 1e-16;
  run_experiment(c, quiet(scratch("eps16")));
  std::ifstream a(named("eps0") / "diagnostics.csv");
  std::ifstream b(named("eps16") / "diagnostics.csv");
  const auto da = read_diagnostics_csv(a), db = read_diagnostics_csv(b);
  REQUIRE(da.size() == db.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    worst = std::max(worst, std::abs(da[i].l2_u - db[i].l2_u));
    worst = std::max(worst, std::abs(da[i].h1_u - db[i].h1_u));
    worst = std::max(worst, std::abs(da[i].l2_sigma - db[i].l2_sigma));
    worst = std::max(worst, std::abs(da[i].l2_rho - db[i].l2_rho));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("reruns of the same config are byte-identical") {
  const RunConfig c = parse_config(kMinimal);
  run_experiment(c, quiet(scratch("rerun_a")));
  run_experiment(c, quiet(scratch("rerun_b")));
  CHECK(result_files(named("rerun_a")) ==
        result_files(named("rerun_b")));
}

TEST_CASE("verify: calibration, stored replay and tampering") {
  RunConfig sim = parse_config(kMinimal);
  sim.t_end = 1.0;
  const fs::path stored = scratch("stored");
  run_experiment(sim, quiet(stored));

  RunConfig ver = sim;
  ver.kind = Kind::verify;
  ver.verify.absorption = false;
  const fs::path fresh = scratch("verify_fresh");
  const RunOutcome a = run_experiment(ver, quiet(fresh));
  CHECK(a.exit_code == kExitSuccess);
  CHECK(fs::exists(fresh / "calibration.json"));
  CHECK(fs::exists(fresh / "radii.json"));
  const auto cal = nlohmann::json::parse(slurp(fresh / "calibration.json"));
  REQUIRE(cal.size() == 1);
  CHECK(cal[0]["c_check_mass"].get<double>() >= 0.0);
  CHECK(cal[0]["dt"].get<double>() == 1e-2);
  for (const char* name : {"mass_dissipation", "decay_H", "velocity_energy"})
    CHECK(a.checks.at(std::string("run_000/") + name) == "pass");

  ver.verify.trajectory = stored.string();
  const fs::path replay = scratch("verify_replay");
  const RunOutcome b = run_experiment(ver, quiet(replay));
  CHECK(b.exit_code == kExitSuccess);
  CHECK(a.checks == b.checks);
  for (const auto& e : fs::directory_iterator(fresh / "run_000"))
    CHECK(slurp(e.path()) == slurp(replay / "run_000" / e.path().filename()));

  {
    std::ofstream os(stored / "diagnostics.csv", std::ios::app);
    os << "\n";
  }
  CHECK_THROWS_AS(run_experiment(ver, quiet(scratch("verify_tampered"))), ChecksumError);
}

TEST_CASE("pullback: workers 1 and 8 give identical files") {
  RunConfig c = parse_config(kCloud);
  c.kind = Kind::pullback;
  run_experiment(c, quiet(scratch("pull_w1"), 1));
  run_experiment(c, quiet(scratch("pull_w8"), 8));
  const auto a = result_files(named("pull_w1"));
  const auto b = result_files(named("pull_w8"));
  CHECK(a.size() >= 5);
  CHECK(a == b);
}

TEST_CASE("sweep: interrupt, resume and compare with an uninterrupted run") {
  const RunConfig c = parse_config(kCloud);
  const fs::path whole = scratch("sweep_whole");
  const RunOutcome full = run_experiment(c, quiet(whole, 2));
  CHECK(full.complete);

  const fs::path part = scratch("sweep_part");
  RunOptions o = quiet(part, 2);
  o.max_jobs = 1;
  const RunOutcome first = run_experiment(c, o);
  CHECK_FALSE(first.complete);
  CHECK(first.exit_code == kExitCheckFailure);
  CHECK_FALSE(read_manifest(part).complete);
  CHECK(fs::exists(part / "reference" / "index.json"));
  CHECK_FALSE(fs::exists(part / "sweep.csv"));

  o.max_jobs = -1;
  o.resume = true;
  const RunOutcome second = run_experiment(c, o);
  CHECK(second.complete);
  const RunManifest m = read_manifest(part);
  CHECK(m.complete);
  CHECK(m.job_seconds.count("reference") == 0);  // not recomputed
  CHECK(m.job_seconds.count("eps_00") == 1);
  CHECK(result_files(part) == result_files(whole));
}

TEST_CASE("sweep over one epsilon gives a single-row table") {
  RunConfig c = parse_config(kCloud);
  c.sweep_epsilons = {0.2};
  const fs::path out = scratch("sweep_one");
  run_experiment(c, quiet(out));
  const std::string csv = slurp(out / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
  CHECK(csv.rfind("epsilon,distance,gauge,converged,worst,nearest\n", 0) == 0);
}

TEST_CASE("convergence writes the error table") {
  RunConfig c = parse_config(kCloud);
  c.kind = Kind::convergence;
  c.convergence_t_final = 0.2;
  const fs::path out = scratch("convergence");
  run_experiment(c, quiet(out));
  const std::string csv = slurp(out / "convergence.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header and four rows
  CHECK(fs::exists(out / "convergence.json"));
}

TEST_CASE("command line: exit codes and messages") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "odd.toml");
    os << "[grid]\nn = 15\n";
  }
  {
    std::ofstream os(dir / "ok.toml");
    os << kMinimal;
  }
  CHECK(run_cli("simulate --config " + (dir / "odd.toml").string(), dir / "odd.log") == kExitUsage);
  CHECK(slurp(dir / "odd.log").find("grid.n = 15 must be even") != std::string::npos);
  CHECK(run_cli("simulate", dir / "missing.log") == kExitUsage);
  CHECK(run_cli("simulate -q --config " + (dir / "ok.toml").string() + " --output " + (dir / "out").string(),
                dir / "ok.log") == kExitSuccess);
  CHECK(fs::exists(dir / "out" / "manifest.json"));

  std::ofstream(dir / "out" / "diagnostics.csv", std::ios::app) << "x";
  {
    std::ofstream os(dir / "replay.toml");
    os << kMinimal << "[verify]\ntrajectory = \"" << (dir / "out").string() << "\"\n";
  }
  CHECK(run_cli("verify -q --config " + (dir / "replay.toml").string() + " --output " + (dir / "v").string(),
                dir / "replay.log") == kExitUsage);
  CHECK(slurp(dir / "replay.log").find("checksum failure") != std::string::npos);
}
