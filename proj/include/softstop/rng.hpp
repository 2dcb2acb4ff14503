#pragma once

#include <cmath>
#include <cstdint>

namespace softstop {

/// Stateless counter-based generator. Every (seed, stream, counter) triple
/// maps to one 64-bit word through a SplitMix64-style finalizer, so path m's
/// draws depend only on its own stream index: results are identical no matter
/// how paths are partitioned across batches or threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(derive(derive(seed, 0x5353544f50ull), stream)) {}

  /// Uniform on the open interval (0,1).
  double uniform(std::uint64_t counter) const {
    const std::uint64_t bits = mix(key_ + counter * kGamma);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes counters 2n and 2n+1.
  double normal(std::uint64_t n) const {
    const double u1 = uniform(2 * n);
    const double u2 = uniform(2 * n + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Unit-rate exponential; consumes counter n.
  double exponential(std::uint64_t n) const { return -std::log(uniform(n)); }

  /// Decorrelates seeds for auxiliary purposes (test sets, Cox draws) so the
  /// derived stream never collides with training streams of the same seed.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    return mix(mix(seed + kGamma) + salt * kGamma);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace softstop
