#pragma once

#include <array>
#include <cstdint>

#include "pql3/common/bytes.hpp"

namespace pql3::fhe {

using u64 = std::uint64_t;

struct Decomposition {
  int base_log = 12;
  int levels = 3;
};

// How the blind-rotation input rounding drift is bounded. WorstCase sums the
// maximal rounding error of every mask coefficient; SixSigma treats them as
// independent uniform errors and uses a 6-sigma bound (for large lwe_dim,
// where the worst case would force an enormous ring).
enum class DriftModel : std::uint8_t { WorstCase = 0, SixSigma = 1 };

// Toy parameters. None of these sets is secure.
struct CryptoParams {
  int lwe_dim = 16;
  int ring_dim = 512;
  int log2q = 64;
  int plaintext_bits = 2;
  int carry_bits = 3;
  double fresh_noise = 0;  // E0, in torus units (same scale as the encoded message)
  u64 rng_seed = 0;

  Decomposition bsk_decomp{12, 3};
  Decomposition ks_decomp{4, 9};
  double bsk_noise = 256;
  double ksk_noise = 256;
  int pk_rows = 34;
  DriftModel drift = DriftModel::WorstCase;

  int total_bits() const { return plaintext_bits + carry_bits; }
  u64 plaintext_modulus() const { return u64{1} << total_bits(); }
  // Delta = q / p'. Only meaningful for log2q == 64.
  u64 delta() const { return u64{1} << (log2q - total_bits()); }
  double delta_f() const;

  // Worst-case noise bounds, torus units.
  double decrypt_budget() const;  // Delta/2
  double pbs_budget() const;      // Delta/2 minus worst mod-switch drift
  double drift_units() const;     // drift in units of q/(2N)
  double pbs_noise() const;       // E_pbs: noise of every bootstrapped ciphertext
  double keyswitch_noise(int input_dim) const;

  // Throws ParameterError when an invariant fails.
  void validate() const;

  Bytes serialize() const;
  static CryptoParams deserialize(ByteReader& in);
  // SHA-256 over every field except the seed.
  std::array<std::uint8_t, 32> fingerprint() const;

  bool same_scheme(const CryptoParams& o) const { return fingerprint() == o.fingerprint(); }

  // Smallest ring and fresh-noise level that make PBS correct for the given
  // widths under the drift model. Used by every named profile.
  static CryptoParams derive(int lwe_dim, int plaintext_bits, int carry_bits, DriftModel drift,
                             u64 seed);
  // n=16, worst-case drift; exhaustive test profile.
  static CryptoParams micro(int plaintext_bits = 2, int carry_bits = 3, u64 seed = 1);
  // n=512, 6-sigma drift.
  static CryptoParams toy(int plaintext_bits = 2, int carry_bits = 3, u64 seed = 1);
};

}  // namespace pql3::fhe
