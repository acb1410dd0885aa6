#pragma once

#include <cstdint>

namespace pql3::fhe {

// Signed gadget decomposition: x ~= sum_j d[j] * 2^(64 - (j+1)*base_log) after
// rounding x to its top base_log*levels bits. d[0] is the most significant
// digit; every digit lies in [-B/2, B/2).
inline void decompose(std::uint64_t x, int base_log, int levels, std::int64_t* d) {
  int total = base_log * levels;
  std::uint64_t r = (x + (std::uint64_t{1} << (63 - total))) >> (64 - total);
  std::uint64_t mask = (std::uint64_t{1} << base_log) - 1;
  std::uint64_t half = std::uint64_t{1} << (base_log - 1);
  for (int j = levels - 1; j >= 0; --j) {
    std::uint64_t v = r & mask;
    r >>= base_log;
    if (v >= half) {
      d[j] = static_cast<std::int64_t>(v) - (std::int64_t{1} << base_log);
      r += 1;
    } else {
      d[j] = static_cast<std::int64_t>(v);
    }
  }
}

}  // namespace pql3::fhe
