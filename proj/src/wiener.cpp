#include "npns/wiener.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <cmath>
#include <ostream>
#include <random>

namespace npns {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

constexpr long kBlock = 1024;
constexpr std::uint64_t kStreamForward = 1;
constexpr std::uint64_t kStreamBackward = 2;
constexpr std::uint64_t kStreamBridge = 16;

long floor_div(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Standard normals number offset .. offset + count - 1 of a counter-based
// stream; element m lives in block m / kBlock.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  double at(long m) {
    const long block = floor_div(m, kBlock);
    if (block != cached_block_) fill(block);
    return cache_[static_cast<std::size_t>(m - block * kBlock)];
  }

 private:
  void fill(long block) {
    const std::uint64_t key =
        splitmix64(splitmix64(splitmix64(seed_) ^ stream_) ^ static_cast<std::uint64_t>(block));
    std::mt19937_64 engine(key);
    std::normal_distribution<double> normal;
    cache_.resize(kBlock);
    for (auto& v : cache_) v = normal(engine);
    cached_block_ = block;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  long cached_block_ = std::numeric_limits<long>::min();
  std::vector<double> cache_;
};

}  // namespace

struct WienerPath::Samples {
  bool seeded = false;
  std::uint64_t seed = 0;
  double dt0 = 0.0;  // level-0 spacing
  int level = 0;
  double dt = 0.0;  // spacing at this level
  long imin0 = 0, imax0 = 0;
  long imin = 0, imax = 0;
  std::vector<double> values;  // values[i - imin]

  double at(long i) const { return values[static_cast<std::size_t>(i - imin)]; }

  static std::shared_ptr<const Samples> generate(std::uint64_t seed, double dt0, int level,
                                                 long imin0, long imax0) {
    auto s = std::make_shared<Samples>();
    s->seeded = true;
    s->seed = seed;
    s->dt0 = dt0;
    s->imin0 = imin0;
    s->imax0 = imax0;
    s->level = 0;
    s->dt = dt0;
    s->imin = imin0;
    s->imax = imax0;
    s->values.assign(static_cast<std::size_t>(imax0 - imin0 + 1), 0.0);
    const double scale = std::sqrt(dt0);
    NormalStream forward(seed, kStreamForward), backward(seed, kStreamBackward);
    auto& v = s->values;
    const std::size_t zero = static_cast<std::size_t>(-imin0);
    for (long i = 1; i <= imax0; ++i) v[zero + i] = v[zero + i - 1] + scale * forward.at(i - 1);
    for (long i = -1; i >= imin0; --i) v[zero + i] = v[zero + i + 1] - scale * backward.at(-1 - i);
    for (int l = 1; l <= level; ++l) s->refine_once();
    return s;
  }

  void refine_once() {
    ++level;
    NormalStream bridge(seed, kStreamBridge + static_cast<std::uint64_t>(level));
    const double half_sd = 0.5 * std::sqrt(dt);
    std::vector<double> fine(2 * values.size() - 1);
    for (std::size_t m = 0; m + 1 < values.size(); ++m) {
      const long j = imin + static_cast<long>(m);
      fine[2 * m] = values[m];
      fine[2 * m + 1] = 0.5 * (values[m] + values[m + 1]) + half_sd * bridge.at(j);
    }
    fine.back() = values.back();
    values = std::move(fine);
    imin *= 2;
    imax *= 2;
    dt *= 0.5;
  }
};

WienerPath::WienerPath(std::shared_ptr<const Samples> samples, double offset, double t_min,
                       double t_max)
    : samples_(std::move(samples)), offset_(offset), t_min_(t_min), t_max_(t_max) {}

WienerPath WienerPath::sample(std::uint64_t seed, double t_min, double t_max, double dt_w) {
  if (!(dt_w > 0.0) || !std::isfinite(dt_w)) throw std::invalid_argument("path resolution dt_w must be positive");
  if (!(t_min <= 0.0) || !(t_max >= 0.0) || !std::isfinite(t_min) || !std::isfinite(t_max))
    throw std::invalid_argument("path window must satisfy t_min <= 0 <= t_max");
  const long imin0 = static_cast<long>(std::floor(t_min / dt_w));
  const long imax0 = static_cast<long>(std::ceil(t_max / dt_w));
  return WienerPath(Samples::generate(seed, dt_w, 0, imin0, imax0), 0.0, t_min, t_max);
}

WienerPath WienerPath::from_samples(double dt_w, long first_index, std::vector<double> values) {
  if (!(dt_w > 0.0)) throw std::invalid_argument("path resolution dt_w must be positive");
  const long last = first_index + static_cast<long>(values.size()) - 1;
  if (first_index > 0 || last < 0) throw std::invalid_argument("samples must include t = 0");
  if (values[static_cast<std::size_t>(-first_index)] != 0.0)
    throw std::invalid_argument("omega(0) must be 0");
  auto s = std::make_shared<Samples>();
  s->dt0 = s->dt = dt_w;
  s->imin0 = s->imin = first_index;
  s->imax0 = s->imax = last;
  s->values = std::move(values);
  return WienerPath(s, 0.0, first_index * dt_w, last * dt_w);
}

double WienerPath::t_min() const noexcept { return t_min_; }
double WienerPath::t_max() const noexcept { return t_max_; }
double WienerPath::dt() const noexcept { return samples_->dt; }
int WienerPath::level() const noexcept { return samples_->level; }
std::uint64_t WienerPath::seed() const noexcept { return samples_->seed; }
bool WienerPath::seeded() const noexcept { return samples_->seeded; }

double WienerPath::base_value(double t) const {
  const Samples& s = *samples_;
  const double u = t / s.dt;
  // Times within rounding of a grid point read that point exactly.
  const double nearest = std::round(u);
  long i = static_cast<long>(std::floor(u));
  double w = u - static_cast<double>(i);
  if (std::abs(u - nearest) <= 1e-9) {
    i = static_cast<long>(nearest);
    w = 0.0;
  }
  // Window edges: allow the end point itself.
  if (i == s.imax && w == 0.0) return s.at(i);
  if (i < s.imin || i >= s.imax) throw std::out_of_range(fmt::format("time {} outside sampled path", t));
  if (w == 0.0) return s.at(i);
  return (1.0 - w) * s.at(i) + w * s.at(i + 1);
}

double WienerPath::operator()(double t) const {
  const double slack = 1e-9 * samples_->dt;
  if (t < t_min_ - slack || t > t_max_ + slack)
    throw std::out_of_range(fmt::format("time {} outside path window [{}, {}]", t, t_min_, t_max_));
  if (offset_ == 0.0) return base_value(t);
  return base_value(t + offset_) - base_value(offset_);
}

WienerPath WienerPath::covering(double t_lo, double t_hi) const {
  const double lo = std::min(t_lo, t_min_), hi = std::max(t_hi, t_max_);
  const Samples& s = *samples_;
  const double base_lo = std::min(lo + offset_, offset_), base_hi = std::max(hi + offset_, offset_);
  const long need_lo = std::min(0L, static_cast<long>(std::floor(base_lo / s.dt0)) - 1);
  const long need_hi = std::max(0L, static_cast<long>(std::ceil(base_hi / s.dt0)) + 1);
  if (need_lo >= s.imin0 && need_hi <= s.imax0) return WienerPath(samples_, offset_, lo, hi);
  if (!s.seeded) throw std::out_of_range("a path built from fixed samples cannot be extended");
  auto grown = Samples::generate(s.seed, s.dt0, s.level, std::min(need_lo, s.imin0), std::max(need_hi, s.imax0));
  return WienerPath(std::move(grown), offset_, lo, hi);
}

WienerPath WienerPath::shifted(double s) const {
  WienerPath out(samples_, offset_ + s, t_min_, t_max_);
  return out.covering(t_min_, t_max_);
}

WienerPath WienerPath::refined() const {
  const Samples& s = *samples_;
  if (!s.seeded) throw std::logic_error("a path built from fixed samples cannot be refined");
  return WienerPath(Samples::generate(s.seed, s.dt0, s.level + 1, s.imin0, s.imax0), offset_, t_min_, t_max_);
}

std::vector<double> WienerPath::grid_times() const {
  const double dt = samples_->dt;
  std::vector<double> times;
  const long first = static_cast<long>(std::ceil((t_min_ + offset_) / dt - 1e-9));
  const long last = static_cast<long>(std::floor((t_max_ + offset_) / dt + 1e-9));
  times.reserve(static_cast<std::size_t>(std::max(0L, last - first + 1)));
  for (long i = first; i <= last; ++i) {
    const double t = i * dt - offset_;
    if (t >= t_min_ - 1e-9 * dt && t <= t_max_ + 1e-9 * dt) times.push_back(t);
  }
  return times;
}

void WienerPath::write_csv(std::ostream& os) const {
  os << "t,omega\n";
  for (double t : grid_times()) os << fmt::format("{:.17g},{:.17g}\n", t, (*this)(t));
}

bool WienerPath::operator==(const WienerPath& o) const {
  if (t_min_ != o.t_min_ || t_max_ != o.t_max_ || dt() != o.dt()) return false;
  const auto times = grid_times();
  if (times != o.grid_times()) return false;
  for (double t : times)
    if ((*this)(t) != o(t)) return false;
  return true;
}

double z_of(const WienerPath& path, double t, double epsilon) {
  if (epsilon == 0.0) return 1.0;
  const double exponent = -epsilon * path(t);
  if (!(std::abs(exponent) <= 700.0))
    throw PathExcursion(fmt::format("|eps * omega(t)| = {:.6g} exceeds 700 at t = {}", std::abs(exponent), t), t);
  return std::exp(exponent);
}

SublinearityReport sublinearity_check(const WienerPath& path) {
  SublinearityReport r;
  const double horizon = std::max(-path.t_min(), path.t_max());
  r.sufficient_horizon = horizon >= 100.0;
  const auto times = path.grid_times();
  std::vector<std::pair<double, double>> ratios;  // (|t|, |omega/t|)
  ratios.reserve(times.size());
  for (double t : times)
    if (std::abs(t) >= 1.0) ratios.emplace_back(std::abs(t), std::abs(path(t) / t));
  for (double t0 = 1.0; t0 <= horizon; t0 *= 2.0) {
    double m = 0.0;
    for (const auto& [at, q] : ratios)
      if (at >= t0) m = std::max(m, q);
    r.thresholds.push_back(t0);
    r.max_ratio.push_back(m);
  }
  for (double end : {path.t_min(), path.t_max()})
    if (std::abs(end) >= 1.0) r.ratio_at_horizon = std::max(r.ratio_at_horizon, std::abs(path(end) / end));
  if (r.max_ratio.empty()) return r;
  const bool all_zero = std::all_of(r.max_ratio.begin(), r.max_ratio.end(), [](double m) { return m == 0.0; });
  r.passed = all_zero || (r.max_ratio.back() <= 0.2 && r.max_ratio.back() < 0.5 * r.max_ratio.front());
  return r;
}

}  // namespace npns
