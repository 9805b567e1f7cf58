#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace jointsched {

/// Deterministic 64-bit generator. Streams are keyed by (seed, stream id) so
/// that replications and per-purpose streams never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    engine_.seed(seq);
  }

  /// Independent stream for (replication, purpose).
  static Rng derive(std::uint64_t seed, std::uint64_t replication,
                    std::uint64_t purpose) {
    return Rng(seed, (replication << 16) ^ purpose);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index drawn from an unnormalized-safe probability vector (sums to ~1).
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // rounding: fall back to the last index with positive mass
    for (std::size_t i = probs.size(); i-- > 0;)
      if (probs[i] > 0.0) return i;
    return 0;
  }

 private:
  std::mt19937_64 engine_;
};

/// Stream purposes used by the simulator.
enum StreamPurpose : std::uint64_t {
  kStateStream = 1,
  kDemandStream = 2,
  kPlacementStream = 3,
  kRateMatrixStream = 4,
};

}  // namespace jointsched
