#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pql3/fhe/params.hpp"

namespace pql3::fhe {

// Univariate table over the 2^input_bits points of the input plaintext space.
// Entries are residues modulo p' of the parameter set it is evaluated under.
class LookupTable {
 public:
  LookupTable() = default;
  LookupTable(std::vector<u64> entries, int input_bits);

  static LookupTable from_function(int input_bits, const std::function<u64(u64)>& g);
  static LookupTable identity(int input_bits);

  const std::vector<u64>& entries() const { return entries_; }
  int input_bits() const { return input_bits_; }
  // Bit width of the largest entry (at least 1).
  int output_bits() const;
  u64 operator()(u64 m) const { return entries_.at(m); }

  // Test polynomial for blind rotation: coefficient j holds Delta * g(j / slot)
  // with slot = 2N / p'. Points beyond the table repeat the last entry.
  std::vector<u64> test_polynomial(const CryptoParams& p) const;

  bool operator==(const LookupTable&) const = default;

 private:
  std::vector<u64> entries_;
  int input_bits_ = 0;
};

}  // namespace pql3::fhe
