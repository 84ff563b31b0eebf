#pragma once

// Seeded RNG with self-contained distribution mappers. mt19937_64 pins the
// raw stream by the standard; the uniform/normal transforms are written out
// here so sampled values are identical on every platform, which the
// reproducibility contracts (manifest regeneration, seeded training) rely on.

#include <cmath>
#include <cstdint>
#include <random>

#include "funssl/common.hpp"

namespace funssl {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one value per call, no caching so the stream stays a pure
  // function of call order.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Independent child stream; used to give each scene / parameter tensor its
  // own seed so regeneration order does not matter.
  Rng fork() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace funssl
