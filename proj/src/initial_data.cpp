#include "npns/initial_data.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "npns/wiener.hpp"

namespace npns {

void EnsembleSpec::validate() const {
  if (count < 1) throw std::invalid_argument("ensemble count must be >= 1");
  if (kmax < 1) throw std::invalid_argument("ensemble kmax must be >= 1");
  if (!(sigma_mean >= 0.0)) throw std::invalid_argument("sigma_mean must be nonnegative");
  if (!(sigma_amplitude >= 0.0) || !(rho_amplitude >= 0.0))
    throw std::invalid_argument("ensemble amplitudes must be nonnegative");
  if (sigma_amplitude + rho_amplitude >= 1.0)
    throw std::invalid_argument("sigma_amplitude + rho_amplitude must be < 1 to keep c1, c2 positive");
  if (!(velocity_norm >= 0.0)) throw std::invalid_argument("velocity_norm must be nonnegative");
}

namespace {

SpectralField low_modes(const Grid& g, int kmax, std::mt19937_64& rng) {
  if (kmax > g.cutoff()) kmax = g.cutoff();
  std::normal_distribution<double> normal;
  SpectralField f(g);
  for (int k1 = 0; k1 <= kmax; ++k1)
    for (int k2 = -kmax; k2 <= kmax; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;
      const double a = normal(rng), b = normal(rng);
      f.set_mode(k1, k2, Complex(a, b) / (1.0 + k1 * k1 + k2 * k2));
    }
  f.set_mean_free(true);
  return f;
}

// Scales f so its grid maximum is `amplitude`; zero stays zero.
SpectralField with_max(SpectralField f, double amplitude) {
  const double m = to_physical(f).max_abs();
  if (m > 0.0) f *= amplitude / m;
  return f;
}

}  // namespace

NpnsState ensemble_member(const Grid& g, const EnsembleSpec& spec, int index) {
  spec.validate();
  std::mt19937_64 rng(splitmix64(splitmix64(spec.seed) ^ static_cast<std::uint64_t>(index)));
  VectorField u = leray_project(VectorField(low_modes(g, spec.kmax, rng), low_modes(g, spec.kmax, rng)));
  const double un = norm_l2(u);
  if (un > 0.0) u *= spec.velocity_norm / un;
  SpectralField sigma = with_max(low_modes(g, spec.kmax, rng), spec.sigma_amplitude * spec.sigma_mean);
  sigma.set_mode(0, 0, spec.sigma_mean);
  SpectralField rho = with_max(low_modes(g, spec.kmax, rng), spec.rho_amplitude * spec.sigma_mean);
  return NpnsState(u, sigma, rho);
}

std::vector<NpnsState> make_ensemble(const Grid& g, const EnsembleSpec& spec) {
  spec.validate();
  std::vector<NpnsState> out;
  for (int i = 0; i < spec.count; ++i) out.push_back(ensemble_member(g, spec, i));
  return out;
}

NpnsState with_h_norm(NpnsState state, double target) {
  const double s2 = norm_l2(state.sigma) * norm_l2(state.sigma) + norm_l2(state.rho) * norm_l2(state.rho);
  if (target * target < s2)
    throw std::invalid_argument(
        fmt::format("target H norm {:.6g} is below the scalar part {:.6g}", target, std::sqrt(s2)));
  const double un = norm_l2(state.velocity);
  if (un == 0.0) {
    if (target * target > s2) throw std::invalid_argument("cannot rescale a zero velocity");
    return state;
  }
  state.velocity *= std::sqrt(target * target - s2) / un;
  return state;
}

VectorField shear_force(const Grid& g, double amplitude, int k) {
  VectorField f(g);
  // amplitude sin(k y) = amplitude (e^{iky} - e^{-iky}) / (2i)
  f.x.set_mode(0, k, Complex(0.0, -0.5 * amplitude));
  f.x.set_mean_free(true);
  f.y.set_mean_free(true);
  return f;
}

}  // namespace npns
