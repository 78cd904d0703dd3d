#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccm {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Lower bound kept on every tau/alpha entry after an M step; keeps
// log-densities finite and tau identifiable.
inline constexpr double kProbFloor = 1e-10;

/// Bad user-supplied input: files, CLI arguments, malformed configuration.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Non-finite likelihood or other numerical breakdown.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Broken internal invariant. A bug, not bad input.
struct InvariantError : std::logic_error {
  using std::logic_error::logic_error;
};

namespace detail {
inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// xoshiro256** seeded through splitmix64. Draws are implemented locally
// (no std::random distributions), making streams identical across
// platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = detail::splitmix64(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw InvariantError("Rng::index: empty range");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return static_cast<std::size_t>(r % n);
  }

  /// Uniform integer in [lo, hi], bounds inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw InvariantError("Rng::uniform_int: bad bounds");
    return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1));
  }

  /// Draw an index with probability proportional to the given nonnegative weights.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw InvariantError("Rng::categorical: negative weight");
      total += w;
    }
    if (total <= 0.0) throw InvariantError("Rng::categorical: zero total weight");
    double u = next_double() * total;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = static_cast<int>(i);
      u -= weights[i];
      if (u < 0.0 && weights[i] > 0.0) return static_cast<int>(i);
    }
    return last_positive;
  }

  double exponential() { return -std::log1p(-next_double()); }

  /// Uniform point on the k-simplex (Dirichlet with unit concentration).
  std::vector<double> simplex(std::size_t k) {
    std::vector<double> v(k);
    double total = 0.0;
    for (auto& x : v) {
      x = exponential();
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  }

  /// Derive an independent deterministic stream.
  Rng fork(uint64_t stream) {
    uint64_t x = next_u64() ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return Rng(detail::splitmix64(x));
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> state_{};
};

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Floor every entry at `floor_value` and renormalize to sum 1.
inline void clamp_simplex(std::vector<double>& v, double floor_value = kProbFloor) {
  double total = 0.0;
  for (auto& x : v) {
    if (!(x > floor_value)) x = floor_value;
    total += x;
  }
  for (auto& x : v) x /= total;
}

}  // namespace ccm
