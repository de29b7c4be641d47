#pragma once

// Run configuration read from TOML. Every key is documented in
// docs/config.md; unknown keys are errors so typos do not go unnoticed.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "npns/dynamics.hpp"
#include "npns/initial_data.hpp"
#include "npns/integrator.hpp"

namespace npns {

enum class Kind { simulate, verify, pullback, sweep, convergence };

const char* to_string(Kind kind);

/// All problems found in a configuration, reported together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  std::vector<std::string> problems;
};

struct ForceMode {
  int component = 0;  // 0 = x, 1 = y
  int k1 = 0, k2 = 0;
  double re = 0.0, im = 0.0;
};

struct VerifyOptions {
  int runs = 1;                 // ensemble members checked
  bool calibrate = true;        // dt/2 companion runs for C_check
  double delta = 1e-3;          // decay-bound slack before the O(dt) part
  double window = 1.0;          // time-averaged integral window
  double coupling_constant = 0.0;  // 0: 1 / eps0^2
  bool radii = true;
  double t_truncate = 0.0;      // 0: -ln(1e12)/nu - 1
  double r0 = 0.0;              // 0: derived from the ensemble
  double gradient_bound = 0.0;  // 0: from the gradient-decay fits
  bool absorption = false;
  std::vector<double> absorption_levels{-1.0, -2.0, -4.0, -8.0};
  double ball_factor = 10.0;    // |x0|_H = ball_factor (2 R0 + R1)
  int absorption_samples = 8;
  std::string trajectory;       // directory of a stored simulate run to replay
};

struct RunConfig {
  Kind kind = Kind::simulate;
  std::string output = "runs/out";

  int n = 32;

  double nu = 1.0, dcoef = 1.0, eps0 = 1.0;
  std::string force = "shear";  // shear | none | modes
  double force_amplitude = 1.0;
  std::vector<ForceMode> force_modes;

  double epsilon = 0.1;
  std::uint64_t noise_seed = 1;
  double dt_w = 1e-3;

  IntegratorConfig integrator;
  double t_end = 1.0;

  EnsembleSpec ensemble;
  int initial_index = 0;

  VerifyOptions verify;
  std::vector<double> pullback_levels{-2.0, -4.0, -8.0, -16.0};
  std::vector<double> sweep_epsilons{0.5, 0.25, 0.1, 0.05};
  double sweep_fraction = 0.25;
  std::vector<double> convergence_epsilons{0.4, 0.2, 0.1, 0.05};
  double convergence_t_final = 1.0;

  Grid grid() const { return Grid(n); }
  PhysicalParams physical_params() const;
  /// Window of the Wiener path needed by this run.
  WienerPath noise_path() const;

  /// Deterministic JSON of every setting except `output`; the config hash
  /// is its SHA-256.
  std::string canonical_json() const;
};

/// Parses and validates; throws ConfigError listing every problem.
RunConfig parse_config(const std::string& toml_text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace npns
