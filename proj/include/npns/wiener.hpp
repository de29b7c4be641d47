#pragma once

// Two-sided Brownian paths with omega(0) = 0, the shift
// (theta_s omega)(t) = omega(t + s) - omega(s), and z(t) = exp(-eps omega(t)).
//
// Level-0 increments on [i dt, (i+1) dt] are drawn in fixed-size blocks,
// each block from its own generator seeded by (seed, stream, block), so any
// window can be regenerated or extended and overlapping values agree bit for
// bit. Positive and negative times use separate streams. Each refinement
// level inserts Brownian-bridge midpoints from a level-keyed stream.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace npns {

/// Raised when |eps omega(t)| is too large to exponentiate safely, or when
/// z leaves the configured excursion band during integration.
class PathExcursion : public std::runtime_error {
 public:
  explicit PathExcursion(const std::string& what, double t = 0.0)
      : std::runtime_error(what), time(t) {}
  double time;
};

/// The splitmix64 finalizer; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

class WienerPath {
 public:
  /// Throws std::invalid_argument unless t_min <= 0 <= t_max and dt_w > 0.
  static WienerPath sample(std::uint64_t seed, double t_min, double t_max, double dt_w);

  /// Deterministic path from values at t = (first_index + i) * dt_w; the
  /// value at t = 0 must be exactly 0. Such paths cannot be extended.
  static WienerPath from_samples(double dt_w, long first_index, std::vector<double> values);

  /// omega(t) by linear interpolation; throws std::out_of_range outside the window.
  double operator()(double t) const;

  double t_min() const noexcept;
  double t_max() const noexcept;
  double dt() const noexcept;
  int level() const noexcept;
  std::uint64_t seed() const noexcept;
  bool seeded() const noexcept;
  /// Accumulated shift relative to the underlying sampled path.
  double offset() const noexcept { return offset_; }

  /// (theta_s omega)(t) = omega(t + s) - omega(s), over the same window
  /// [t_min, t_max] in the new time variable; extends the underlying
  /// samples when needed (seeded paths only).
  WienerPath shifted(double s) const;

  /// The same path, with the window grown to contain [t_lo, t_hi].
  WienerPath covering(double t_lo, double t_hi) const;

  /// Halves dt_w by Brownian-bridge midpoints; existing grid values are kept.
  WienerPath refined() const;

  /// Grid times in the window and the path values there.
  std::vector<double> grid_times() const;

  /// CSV with header "t,omega", one line per grid time.
  void write_csv(std::ostream& os) const;

  bool operator==(const WienerPath& o) const;

 private:
  struct Samples;
  WienerPath(std::shared_ptr<const Samples> samples, double offset, double t_min, double t_max);
  double base_value(double t) const;

  std::shared_ptr<const Samples> samples_;
  double offset_ = 0.0;
  double t_min_ = 0.0;
  double t_max_ = 0.0;
};

inline WienerPath shift_theta(const WienerPath& path, double s) { return path.shifted(s); }

/// exp(-eps omega(t)); exactly 1 when eps = 0. Throws PathExcursion when
/// |eps omega(t)| > 700.
double z_of(const WienerPath& path, double t, double epsilon);

struct SublinearityReport {
  std::vector<double> thresholds;   // dyadic T0
  std::vector<double> max_ratio;    // max |omega(t)/t| over |t| >= T0
  double ratio_at_horizon = 0.0;    // max of |omega(t)/t| at the two window ends
  bool sufficient_horizon = false;  // window reaches |t| >= 100 on both sides
  bool passed = false;
};

/// Report-only check that |omega(t)/t| shrinks with |t|: the maximum over
/// |t| >= T0 must fall below 0.2 at the largest T0 and below half its value
/// at T0 = 1 (or vanish identically).
SublinearityReport sublinearity_check(const WienerPath& path);

}  // namespace npns
