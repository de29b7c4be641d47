#pragma once

// Per-step norms of a state, recorded by the integrator and consumed by the
// inequality checks.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "npns/dynamics.hpp"

namespace npns {

struct DiagnosticsRecord {
  double time = 0.0;
  double z = 1.0;
  // Velocity in both gauges: u physical, v = z u transformed.
  double l2_u = 0.0, l2_v = 0.0, h1_u = 0.0, h1_v = 0.0;
  double l2_sigma = 0.0;
  double l2_sigma_fluct = 0.0;  // ||sigma - mean(sigma)||
  double l2_rho = 0.0;
  double h1_sigma = 0.0, h1_rho = 0.0;
  double l3_grad_rho = 0.0;  // || |grad rho| ||_{L^3}
  double mean_sigma = 0.0, mean_rho = 0.0;
  double min_c1 = 0.0, min_c2 = 0.0;
  double min_sigma = 0.0, max_sigma = 0.0;
  double max_speed = 0.0;  // max |u| on the collocation grid
  std::map<std::string, double> residuals;
};

/// Diagnostics of a state whose velocity is expressed in its own gauge;
/// z converts between u and v.
DiagnosticsRecord diagnose(const NpnsState& state, double z);

/// CSV with a fixed column set followed by one column per residual name
/// found in the first record.
void write_diagnostics_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& records);

/// Inverse of write_diagnostics_csv; values round-trip exactly. Throws
/// std::runtime_error on a malformed header or row.
std::vector<DiagnosticsRecord> read_diagnostics_csv(std::istream& is);

}  // namespace npns
