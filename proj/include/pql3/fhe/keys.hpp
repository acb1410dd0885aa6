#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pql3/common/bytes.hpp"
#include "pql3/fhe/lwe.hpp"
#include "pql3/fhe/params.hpp"
#include "pql3/fhe/rng.hpp"

namespace pql3::fhe {

enum class KeyRole : std::uint8_t { ClientSecret = 1, ServerEvaluation = 2 };

// Key-switching key between two LWE secret keys: row (i, j) encrypts
// s_in[i] * q / B^j under the output key.
class LweKeySwitchKey {
 public:
  LweKeySwitchKey() = default;
  static LweKeySwitchKey generate(const std::vector<u64>& in_key, u64 in_id, const std::vector<u64>& out_key,
                                  u64 out_id, const CryptoParams& p, Rng& rng);

  int input_dim() const { return in_dim_; }
  int output_dim() const { return out_dim_; }
  u64 source_id() const { return source_id_; }
  u64 target_id() const { return target_id_; }
  const Decomposition& decomposition() const { return decomp_; }
  // Worst-case noise added by one application.
  double added_noise() const { return added_noise_; }
  bool empty() const { return data_.empty(); }

  // Raw switch of (a, b) with len(a) == input_dim; no checks.
  void apply(const u64* a, u64 b, std::vector<u64>& out_a, u64& out_b) const;

  void serialize(ByteWriter& w) const;
  static LweKeySwitchKey deserialize(ByteReader& in);

 private:
  int in_dim_ = 0, out_dim_ = 0;
  Decomposition decomp_;
  u64 source_id_ = 0, target_id_ = 0;
  double added_noise_ = 0;
  std::vector<u64> data_;  // [in_dim][levels][out_dim + 1]
};

class ServerKey;
struct KeyMaterial;

// Client custody: secret keys, public encryption material and the encryption
// randomness. encrypt() mutates the generator, so one ClientKey per thread.
class ClientKey {
 public:
  ClientKey() = default;
  const CryptoParams& params() const { return *params_; }
  ParamsPtr params_ptr() const { return params_; }
  u64 key_id() const { return key_id_; }
  const std::vector<u64>& secret_bits() const { return sk_; }

  // Public-key encryption of 0 <= m < 2^space_bits (default plaintext_bits).
  LweCiphertext encrypt(u64 m);
  LweCiphertext encrypt(u64 m, int space_bits);

  // Throws BudgetExhausted when the ledger says the noise may have crossed
  // Delta/2; the unchecked value is attached.
  u64 decrypt(const LweCiphertext& c) const;
  u64 decrypt_unchecked(const LweCiphertext& c) const;
  // Actual signed error of c against the message it is supposed to hold.
  std::int64_t phase_error(const LweCiphertext& c, u64 m) const;

  Bytes serialize() const;
  static ClientKey deserialize(std::span<const std::uint8_t> bytes);

 private:
  friend KeyMaterial keygen(const CryptoParams& params);
  friend LweKeySwitchKey make_keyswitch_key(const ClientKey& from, const ClientKey& to);
  friend class ReferencePbs;
  void check_owned(const LweCiphertext& c) const;
  u64 phase(const LweCiphertext& c) const;

  ParamsPtr params_;
  u64 key_id_ = 0;
  std::vector<u64> sk_;            // binary LWE key, length n
  std::vector<u64> glwe_sk_;       // binary ring key, length N (kept for re-deriving the server key)
  std::vector<u64> pk_;            // pk_rows x (n + 1)
  Rng rng_;
};

// Key switching between two client keys under the same parameters.
LweKeySwitchKey make_keyswitch_key(const ClientKey& from, const ClientKey& to);

struct FourierBsk;

// Evaluation key: bootstrapping key (GGSW encryptions of the LWE key bits under
// the ring key) and the key-switching key from the extracted ring key back to
// the LWE key. Holds no secret material. Copies share state.
class ServerKey {
 public:
  ServerKey() = default;
  bool empty() const { return !data_; }
  const CryptoParams& params() const;
  ParamsPtr params_ptr() const;
  u64 key_id() const;        // LWE key the inputs/outputs live under
  u64 ring_key_id() const;   // extracted ring key
  const LweKeySwitchKey& ksk() const;
  std::span<const u64> bsk() const;  // [n][2*levels][2][N]
  // Fourier form of the bootstrapping key, built once on first use when it
  // fits in the cache budget; nullptr otherwise.
  const FourierBsk* fourier() const;

  Bytes serialize() const;
  static ServerKey deserialize(std::span<const std::uint8_t> bytes);

  struct Data;

 private:
  friend KeyMaterial keygen(const CryptoParams& params);
  std::shared_ptr<Data> data_;
};

struct KeyMaterial {
  ClientKey client;
  ServerKey server;
};

// Deterministic in params.rng_seed.
KeyMaterial keygen(const CryptoParams& params);

// Key identifier: leading 8 bytes of SHA-256(params fingerprint || key bits).
u64 key_fingerprint(const CryptoParams& p, const std::vector<u64>& bits);

}  // namespace pql3::fhe
