#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pql3/common/bytes.hpp"
#include "pql3/fhe/params.hpp"

namespace pql3::fhe {

// Worst-case error amplitude (torus units) plus the number of homomorphic
// operations applied since the last bootstrap.
struct NoiseEstimate {
  double magnitude = 0;
  std::uint32_t ops_since_refresh = 0;
};

using ParamsPtr = std::shared_ptr<const CryptoParams>;

// c = (a, b) with b = <a, s> + e + Delta*m over Z_{2^64}.
// plaintext_space is the bit width the message is known to fit in; decryption
// reduces modulo 2^plaintext_space.
struct LweCiphertext {
  std::vector<u64> a;
  u64 b = 0;
  NoiseEstimate noise;
  int plaintext_space = 0;
  u64 key_id = 0;
  ParamsPtr params;

  std::size_t dim() const { return a.size(); }

  static constexpr std::uint32_t kVersion = 1;
  static std::size_t serialized_size(std::size_t n) { return 4 + 2 + 1 + 1 + 8 * (n + 1) + 8; }

  void serialize(ByteWriter& w) const;
  Bytes serialize() const;
  // key_id and params are not on the wire; the receiver supplies the context.
  static LweCiphertext deserialize(ByteReader& in, ParamsPtr params, u64 key_id);
};

// Ciphertext with an all-zero mask encrypting m exactly (no noise). Useful as
// the starting point of linear combinations.
LweCiphertext trivial(ParamsPtr params, u64 key_id, std::size_t n, u64 m, int space);

}  // namespace pql3::fhe
