#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sgim {

/// Seeded generator used everywhere randomness appears.
///
/// The standard library leaves the algorithms behind std::*_distribution
/// implementation-defined, so the draws are derived directly from the raw
/// mt19937_64 stream. That keeps datasets and checkpoints reproducible across
/// standard libraries, not only across runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stage seed from a master seed by a fixed offset.
std::uint64_t stage_seed(std::uint64_t master, std::uint64_t offset);

}  // namespace sgim
