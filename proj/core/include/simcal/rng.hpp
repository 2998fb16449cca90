#pragma once

#include <cstdint>
#include <random>

#include "simcal/common.hpp"

namespace simcal {

/// Named sub-streams. Every consumer of randomness draws from its own stream so that
/// adding a draw in one place never shifts the values seen by another.
enum class Stream : std::uint64_t {
  impairments = 1,
  geometry = 2,
  noise = 3,
  monte_carlo = 4,
};

/// Seeded random stream with a portable draw contract.
///
/// The engine is `std::mt19937_64` (fully specified by the standard). Distributions are
/// implemented here rather than through `<random>` distributions, whose algorithms are
/// implementation-defined:
///   - uniform01: top 53 bits of one engine output, scaled by 2^-53, in [0, 1);
///   - normal: Box-Muller, consumes two uniform01 draws u1, u2 and returns
///     sqrt(-2 ln(1 - u1)) * cos(2 pi u2); the sine branch is discarded;
///   - complex_normal(var): real part first, then imaginary, each normal * sqrt(var / 2).
class Rng {
 public:
  /// Derives the engine seed from (seed, stream, drop) via splitmix64 so that drop streams
  /// are independent of the number of workers that process them.
  Rng(std::uint64_t seed, Stream stream, std::uint64_t drop = 0);

  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  cplx complex_normal(double variance);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer, exposed for tests and seed folding.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace simcal
