#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "pql3/fhe/fourier_bsk.hpp"
#include "pql3/fhe/keys.hpp"

namespace pql3::fhe {

struct ServerKey::Data {
  ParamsPtr params;
  u64 key_id = 0;
  u64 ring_key_id = 0;
  std::vector<u64> bsk;
  LweKeySwitchKey ksk;
  std::once_flag fourier_once;
  std::unique_ptr<FourierBsk> fourier;
};

namespace detail {
inline constexpr std::uint8_t kKeyVersion = 1;
u64 dot(const u64* a, const std::vector<u64>& s);
u64 noise_sample(Rng& rng, double mag);
void write_bits(ByteWriter& w, const std::vector<u64>& bits);
std::vector<u64> read_bits(ByteReader& in);
void write_u64s(ByteWriter& w, std::span<const u64> v);
std::vector<u64> read_u64s(ByteReader& in);
}  // namespace detail

}  // namespace pql3::fhe
