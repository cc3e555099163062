#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace alsim {

// All randomness in the library flows through this wrapper. The engine
// (mt19937_64) is fully specified by the standard, and the distribution
// transforms below are written out explicitly, so identical seeds give
// bitwise-identical streams on every platform. The std:: distribution
// classes are implementation-defined and would break that guarantee.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }
  }

  // Deterministic seed derivation (splitmix64 finalizer over a combine).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 1 | b >> 63);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix(mix(a, b), c);
  }

 private:
  std::mt19937_64 engine_;
};

// Tags for deriving per-purpose sub-seeds from one experiment seed.
namespace seed_tag {
inline constexpr std::uint64_t warmstart = 0x11;
inline constexpr std::uint64_t build = 0x22;
inline constexpr std::uint64_t train = 0x33;
inline constexpr std::uint64_t validation = 0x44;
inline constexpr std::uint64_t acquire = 0x55;
inline constexpr std::uint64_t ensemble = 0x66;
inline constexpr std::uint64_t sibling_build = 0x77;
inline constexpr std::uint64_t sibling_train = 0x88;
}  // namespace seed_tag

}  // namespace alsim
