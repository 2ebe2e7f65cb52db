#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace obtuse {

// SplitMix64 finalizer on (master, stream). Derives independent substream
// seeds in O(1), so trajectory k can be generated without touching the
// streams of trajectories 0..k-1.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seedable substream generator: std::mt19937_64 over a SplitMix64-derived
// seed. The engine's output sequence is fixed by the standard, and all
// variates below are built from it directly (no std::*_distribution), so
// every draw is identical across platforms and compilers.
class SubstreamRng {
 public:
  explicit SubstreamRng(std::uint64_t master, std::uint64_t stream = 0)
      : engine_(substream_seed(master, stream)) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on (0,1): top 53 bits offset by half an ulp, never 0 or 1.
  double uniform() { return (static_cast<double>(raw() >> 11) + 0.5) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exact Poisson counts by the product method. Means above 60 are split
  // into chunks (Poisson additivity) so exp(-mean) cannot underflow.
  std::int64_t poisson(double mean) {
    std::int64_t total = 0;
    while (mean > 60.0) {
      total += poisson_small(60.0);
      mean -= 60.0;
    }
    return total + poisson_small(mean);
  }

 private:
  std::int64_t poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace obtuse
