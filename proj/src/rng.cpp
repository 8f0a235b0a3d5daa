#include "lau/rng.hpp"

#include <cmath>
#include <numbers>

namespace lau {

namespace {

std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  return splitmix64_finalize(state_);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double std) {
  const double u1 = uniform();
  const double u2 = uniform();
  // 1 - u1 lies in (0, 1], so the log is finite.
  const double radius = std::sqrt(-2.0 * std::log1p(-u1));
  return mean + std * radius * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(static_cast<std::uint64_t>(uniform() * static_cast<double>(span)));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64_finalize(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

}  // namespace lau
