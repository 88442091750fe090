#pragma once

#include <cstdint>
#include <random>

#include "cfsim/common.hpp"

namespace cfsim {

// Named substream ids used by the harness. Streams are derived from
// (seed, purpose, indices...) so every trial regenerates identical randomness
// regardless of detector, thread count, or execution order.
enum class Stream : std::uint64_t {
  kGeometry = 1,
  kShadowing = 2,
  kPilotAssign = 3,
  kChannels = 4,
  kPilotNoise = 5,
  kDataNoise = 6,
  kDataBits = 7,
  kGeneric = 8,
};

// Deterministic random stream. Gaussian variates are produced by Box-Muller
// on top of mt19937_64 so sequences do not depend on the standard library's
// unspecified std::normal_distribution algorithm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng substream(std::uint64_t seed, Stream purpose,
                       std::uint64_t i0 = 0, std::uint64_t i1 = 0,
                       std::uint64_t i2 = 0);

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal N(0, 1).
  double normal();
  // CN(0, var): independent real/imag parts with variance var/2 each.
  cplx cnormal(double var);

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 eng_;
};

// SplitMix64 mixing, used to derive substream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cfsim
