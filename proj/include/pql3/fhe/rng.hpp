#pragma once

#include <cstdint>
#include <random>

namespace pql3::fhe {

// Seeded generator with its own bounded sampling so that streams are identical
// across standard libraries (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  bool bit() { return (gen_() >> 63) != 0; }

  // Uniform in [0, bound), bound > 0. Rejection sampling on the top bits.
  std::uint64_t below(std::uint64_t bound) {
    if ((bound & (bound - 1)) == 0) return gen_() & (bound - 1);
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do x = gen_();
    while (x >= limit);
    return x % bound;
  }

  // Uniform integer in [-mag, mag].
  std::int64_t symmetric(std::uint64_t mag) {
    return static_cast<std::int64_t>(below(2 * mag + 1)) - static_cast<std::int64_t>(mag);
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 gen_;
};

}  // namespace pql3::fhe
