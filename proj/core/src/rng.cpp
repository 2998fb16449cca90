#include "simcal/rng.hpp"

namespace simcal {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, Stream stream, std::uint64_t drop) {
  std::uint64_t folded = splitmix64(seed);
  folded = splitmix64(folded ^ static_cast<std::uint64_t>(stream));
  folded = splitmix64(folded ^ drop);
  engine_.seed(folded);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(kTwoPi * u2);
}

cplx Rng::complex_normal(double variance) {
  const double scale = std::sqrt(variance / 2.0);
  const double re = normal() * scale;
  const double im = normal() * scale;
  return {re, im};
}

}  // namespace simcal
