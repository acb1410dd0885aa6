#pragma once

#include "check_result.hpp"
#include "pql3/fhe/keys.hpp"

namespace pql3::checks {

// All sweeps expect the micro profile with plaintext_bits=2, carry_bits=3
// (five-bit message space).

// Dec(Enc), add_ct, mul_ct, keyswitch and pbs over every plaintext point.
CheckResult fhe_exhaustive(fhe::KeyMaterial& km, fhe::KeyMaterial& other);

// Blind rotation against the key-escrow backend on random tables.
CheckResult pbs_backend_agreement(fhe::KeyMaterial& km, int n_tables, std::uint64_t seed);

// Random op sequences: whenever the ledger says the noise is within budget the
// decryption must be exact; otherwise decrypt must refuse.
CheckResult ledger_soundness(fhe::KeyMaterial& km, fhe::KeyMaterial& other, int sequences, std::uint64_t seed);

// x <- pbs(mul_ct(x, y_k), g_k) for the given number of steps.
CheckResult pbs_chain(fhe::KeyMaterial& km, int steps, std::uint64_t seed);

}  // namespace pql3::checks
