#pragma once

// Finite-sample pullback attractors: clouds of time-0 states reached from an
// initial ensemble at increasingly negative start times, Hausdorff
// semi-distances between clouds, and the small-noise experiments.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "npns/integrator.hpp"

namespace npns {

struct AttractorCloud {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double pullback_time = 0.0;         // the deepest t0; points come from it
  std::vector<double> t0_levels;
  std::vector<NpnsState> points;      // physical gauge, time 0
  std::vector<std::string> provenance;
  std::vector<double> displacement;   // max_i |x_i(level j+1) - x_i(level j)|_H
  double gauge = 0.0;                 // displacement between the two deepest levels
  bool converged = false;
};

struct CloudConfig {
  std::vector<double> t0_levels{-2.0, -4.0, -8.0, -16.0};
  std::vector<NpnsState> initial_data;
  std::vector<std::string> provenance;  // one per datum; optional
  IntegratorConfig integrator;
  int workers = 1;
};

/// Runs every (datum, level) pullback and keeps the deepest level. The
/// cloud is converged when the gauge is at roundoff, or when the
/// displacement decreased over the last three levels.
AttractorCloud build_cloud(double epsilon, const WienerPath& path, const PhysicalParams& params,
                           const CloudConfig& config);

enum class Metric { H, V };

const char* to_string(Metric metric);

struct SemiDistanceResult {
  double value = 0.0;
  std::size_t worst = 0;    // index in a
  std::size_t nearest = 0;  // its nearest neighbour in b
  Metric metric = Metric::H;
};

/// sup over a of inf over b of the distance. Throws on empty clouds or
/// mismatched grids.
SemiDistanceResult semi_distance(const std::vector<NpnsState>& a, const std::vector<NpnsState>& b,
                                 Metric metric = Metric::H);
SemiDistanceResult semi_distance(const AttractorCloud& a, const AttractorCloud& b, Metric metric = Metric::H);

double hausdorff_distance(const std::vector<NpnsState>& a, const std::vector<NpnsState>& b,
                          Metric metric = Metric::H);

struct ConvergenceRow {
  double epsilon = 0.0;
  double error = 0.0;  // |v^eps(t) - u(t)|_{L^2}
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;      // log-log regression over eps > 0 with error > 0
  bool monotone = false;   // error strictly decreasing along the list
  bool passed = false;     // monotone and slope in [0.7, 1.3]
  std::string note;
};

/// Same x0, path, grid and dt for every epsilon; u is the epsilon = 0 run.
ConvergenceTable pathwise_convergence_check(const std::vector<double>& epsilons, const WienerPath& path,
                                            const PhysicalParams& params, const NpnsState& x0, double t_final,
                                            const IntegratorConfig& config, int workers = 1);

struct SweepRow {
  double epsilon = 0.0;
  double distance = 0.0;  // semi-distance from the epsilon cloud to the reference cloud
  double gauge = 0.0;     // max of the two cloud gauges
  bool converged = false;
  std::size_t worst = 0, nearest = 0;
};

struct SweepResult {
  AttractorCloud reference;  // epsilon = 0
  std::vector<AttractorCloud> clouds;
  std::vector<SweepRow> rows;
  bool indicative_only = false;  // some cloud did not converge
  bool passed = false;           // last distance <= fraction * first distance
  double fraction = 0.25;
};

/// Clouds for each epsilon against the epsilon = 0 cloud built with the
/// same machinery.
SweepResult upper_semicontinuity_sweep(const std::vector<double>& epsilons, const WienerPath& path,
                                       const PhysicalParams& params, const CloudConfig& config,
                                       double fraction = 0.25);

/// Rows from clouds built elsewhere (clouds[i] at its own epsilon).
SweepResult assemble_sweep(AttractorCloud reference, std::vector<AttractorCloud> clouds, double fraction = 0.25);

/// Sweep table: epsilon,distance,gauge,converged,worst,nearest.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);
/// Convergence table: epsilon,error.
void write_convergence_csv(std::ostream& os, const ConvergenceTable& table);

/// Directory with point_<i>.bin (lossless) and index.json.
void save_cloud(const std::filesystem::path& dir, const AttractorCloud& cloud);
AttractorCloud load_cloud(const std::filesystem::path& dir);

}  // namespace npns
