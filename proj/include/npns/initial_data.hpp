#pragma once

// Seeded initial ensembles: sigma = mean + fluctuation, mean-free rho, and
// a solenoidal low-mode velocity. Member i depends only on (seed, i).

#include <cstdint>
#include <vector>

#include "npns/dynamics.hpp"

namespace npns {

struct EnsembleSpec {
  int count = 8;
  std::uint64_t seed = 1;
  int kmax = 3;                 // modes with |k1|, |k2| <= kmax
  double sigma_mean = 1.0;
  double sigma_amplitude = 0.3; // max |sigma - mean| / mean on the grid
  double rho_amplitude = 0.3;   // max |rho| / mean on the grid
  double velocity_norm = 1.0;   // L2 norm of u

  /// sigma_amplitude + rho_amplitude < 1 keeps c1, c2 > 0 at the grid points.
  void validate() const;
};

/// Member `index` of the ensemble.
NpnsState ensemble_member(const Grid& grid, const EnsembleSpec& spec, int index);

std::vector<NpnsState> make_ensemble(const Grid& grid, const EnsembleSpec& spec);

/// Rescales the velocity so that norm_h(state) equals `target`; throws if
/// the scalar fields alone already exceed it.
NpnsState with_h_norm(NpnsState state, double target);

/// Single-mode forcing (amplitude sin(k y), 0), divergence- and mean-free.
VectorField shear_force(const Grid& grid, double amplitude, int k = 1);

}  // namespace npns
