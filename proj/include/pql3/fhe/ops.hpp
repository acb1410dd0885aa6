#pragma once

#include <cstdint>
#include <span>

#include "pql3/fhe/keys.hpp"
#include "pql3/fhe/lut.hpp"
#include "pql3/fhe/lwe.hpp"
#include "pql3/fhe/pbs.hpp"

namespace pql3::fhe {

// Message arithmetic is modulo p' = 2^(plaintext_bits + carry_bits); the
// plaintext_space field tracks how many low bits are meaningful.

LweCiphertext add_ct(const LweCiphertext& x, const LweCiphertext& y);
LweCiphertext sub_ct(const LweCiphertext& x, const LweCiphertext& y);
LweCiphertext neg_ct(const LweCiphertext& x);
// Adds a clear constant; noise unchanged.
LweCiphertext add_pt(const LweCiphertext& x, std::int64_t m);
// Scales by a clear integer; noise becomes |k| * E.
LweCiphertext mul_pt(const LweCiphertext& x, std::int64_t k);

// sum_i w_i * x_i + constant, with the result width asserted by the caller
// (used by compiled plans, whose ranges are proven statically).
LweCiphertext linear_combination(std::span<const LweCiphertext* const> xs, std::span<const std::int64_t> w,
                                 std::int64_t constant, int result_bits);

// Re-labels the meaningful width of x. The caller must know the message fits.
LweCiphertext with_space(LweCiphertext x, int bits);

LweCiphertext pbs(const LweCiphertext& x, const LookupTable& g, const PbsEngine& engine);

// Quarter-square product x*y = floor((x+y)^2/4) - floor((x-y)^2/4) for signed
// operands known to lie in [lo1, hi1] and [lo2, hi2]. Both square tables take
// an offset input so that their argument is non-negative.
struct QuarterSquare {
  std::int64_t lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
  std::int64_t sum_offset = 0;   // table index = x + y - sum_offset
  std::int64_t diff_offset = 0;  // table index = x - y - diff_offset
  LookupTable sum_table, diff_table;
  int out_bits = 0;

  // Throws RangeError when an argument span does not fit the padded space.
  static QuarterSquare make(std::int64_t lo1, std::int64_t hi1, std::int64_t lo2, std::int64_t hi2,
                            const CryptoParams& p);
  // Same arithmetic over clear residues modulo p'.
  u64 clear(u64 x, u64 y, const CryptoParams& p) const;
  LweCiphertext apply(const LweCiphertext& x, const LweCiphertext& y, const PbsEngine& engine) const;
};

// Unsigned product of two ciphertexts via two bootstraps.
LweCiphertext mul_ct(const LweCiphertext& x, const LweCiphertext& y, const PbsEngine& engine);

LweCiphertext keyswitch(const LweCiphertext& x, const LweKeySwitchKey& ksk);

}  // namespace pql3::fhe
