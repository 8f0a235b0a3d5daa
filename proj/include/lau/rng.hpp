#pragma once

#include <cstdint>

namespace lau {

/// SplitMix64 generator. Single owner; not safe to share between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  /// Next raw 64-bit SplitMix64 output.
  std::uint64_t next_u64();
  /// High 53 bits of the next output scaled into [0, 1).
  double uniform();
  /// Box-Muller on two uniform draws (both consumed).
  double normal(double mean = 0.0, double std = 1.0);
  /// Integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi);
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

inline double rng_uniform(Rng& rng) { return rng.uniform(); }
inline double rng_normal(Rng& rng, double mean, double std) {
  return rng.normal(mean, std);
}

/// Stateless mixing of two words into a fresh seed (used to derive
/// per-sample and per-run streams).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lau
