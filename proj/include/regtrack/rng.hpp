#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace regtrack {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: SplitMix64 over a state derived from a key tuple.
///
/// All randomness in the library goes through this class so that results do
/// not depend on the standard library's distribution implementations.
/// Gaussians use the Box-Muller transform; uniforms take the top 53 bits.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) : state_(mix64(seed)) {}
  KeyedRng(std::uint64_t seed, std::initializer_list<std::uint64_t> key) : state_(mix64(seed)) {
    for (auto k : key) {
      state_ = mix64(state_ ^ mix64(k));
    }
  }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  long uniform_int(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(next() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  std::uint64_t state_;
};

}  // namespace regtrack
