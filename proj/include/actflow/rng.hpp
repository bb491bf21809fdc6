#pragma once

#include <cmath>
#include <cstdint>

namespace actflow {

/// splitmix64 generator. Every random choice in the pipeline flows through
/// this so that results are reproducible bit-for-bit across platforms and
/// implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(u01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  /// Standard normal via the Box-Muller transform; consumes two outputs.
  double gauss() {
    double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

 private:
  static constexpr double kTwoPi = 6.28318530717958647692;
  std::uint64_t state_;
};

}  // namespace actflow
