#include "pql3/fhe/keys.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <cstring>
#include <mutex>

#include "pql3/common/error.hpp"
#include "pql3/fhe/decompose.hpp"
#include "pql3/fhe/fourier_bsk.hpp"
#include "server_key_data.hpp"
#include "pql3/fhe/poly.hpp"

namespace pql3::fhe {

using namespace detail;

namespace {

u64 encryption_seed(u64 seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL; }

std::vector<u64> binary_key(std::size_t n, Rng& rng) {
  std::vector<u64> k(n);
  for (auto& b : k) b = rng.bit() ? 1 : 0;
  return k;
}

}  // namespace

LweKeySwitchKey make_keyswitch_key(const ClientKey& from, const ClientKey& to) {
  if (!from.params().same_scheme(to.params())) throw IncompatibleError("keyswitch between different parameter sets");
  Rng rng(from.params().rng_seed ^ (to.key_id() * 0xD1B54A32D192ED03ULL) ^ from.key_id());
  return LweKeySwitchKey::generate(from.sk_, from.key_id_, to.sk_, to.key_id_, from.params(), rng);
}


// ---------------------------------------------------------------- client key

void ClientKey::check_owned(const LweCiphertext& c) const {
  if (!params_) throw KeyError("empty client key");
  if (c.key_id != key_id_) throw KeyError("ciphertext was not encrypted under this key");
  if (c.a.size() != sk_.size()) throw IncompatibleError("ciphertext dimension mismatch");
}

LweCiphertext ClientKey::encrypt(u64 m) { return encrypt(m, params_->plaintext_bits); }

LweCiphertext ClientKey::encrypt(u64 m, int space_bits) {
  if (!params_) throw KeyError("empty client key");
  const auto& p = *params_;
  if (space_bits < 1 || space_bits > p.total_bits()) throw RangeError("plaintext space out of range");
  if (m >= (u64{1} << space_bits)) throw RangeError("plaintext " + std::to_string(m) + " out of range");
  std::size_t n = sk_.size();
  std::size_t row = n + 1;
  std::size_t rows = pk_.size() / row;
  LweCiphertext c;
  c.a.assign(n, 0);
  // A non-empty random subset sum of encryptions of zero.
  bool any = false;
  while (!any) {
    for (std::size_t r = 0; r < rows; ++r) {
      if (!rng_.bit()) continue;
      any = true;
      const u64* src = &pk_[r * row];
      for (std::size_t i = 0; i < n; ++i) c.a[i] += src[i];
      c.b += src[n];
    }
  }
  c.b += m * p.delta();
  c.noise = {p.fresh_noise, 0};
  c.plaintext_space = space_bits;
  c.key_id = key_id_;
  c.params = params_;
  return c;
}

u64 ClientKey::phase(const LweCiphertext& c) const { return c.b - dot(c.a.data(), sk_); }

u64 ClientKey::decrypt_unchecked(const LweCiphertext& c) const {
  check_owned(c);
  const auto& p = *params_;
  int shift = p.log2q - p.total_bits();
  u64 ph = phase(c);
  u64 q = ph >> shift;
  u64 rem = ph & ((u64{1} << shift) - 1);
  u64 half = u64{1} << (shift - 1);
  if (rem > half || (rem == half && (q & 1))) ++q;
  q &= p.plaintext_modulus() - 1;
  return q & ((u64{1} << c.plaintext_space) - 1);
}

u64 ClientKey::decrypt(const LweCiphertext& c) const {
  u64 m = decrypt_unchecked(c);
  if (c.noise.magnitude >= params_->decrypt_budget())
    throw BudgetExhausted("noise budget exhausted: " + std::to_string(c.noise.magnitude) +
                              " >= Delta/2",
                          static_cast<long long>(m));
  return m;
}

std::int64_t ClientKey::phase_error(const LweCiphertext& c, u64 m) const {
  check_owned(c);
  return static_cast<std::int64_t>(phase(c) - m * params_->delta());
}

Bytes ClientKey::serialize() const {
  if (!params_) throw KeyError("empty client key");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(KeyRole::ClientSecret));
  w.u8(kKeyVersion);
  w.blob(params_->serialize());
  w.u64(key_id_);
  write_bits(w, sk_);
  write_bits(w, glwe_sk_);
  write_u64s(w, pk_);
  return w.take();
}

ClientKey ClientKey::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  if (in.u8() != static_cast<std::uint8_t>(KeyRole::ClientSecret)) throw KeyError("not a client key");
  if (in.u8() != kKeyVersion) throw IoError("client key version mismatch");
  ClientKey k;
  auto pb = in.blob();
  ByteReader pin(pb);
  auto params = CryptoParams::deserialize(pin);
  params.validate();
  k.params_ = std::make_shared<const CryptoParams>(params);
  k.key_id_ = in.u64();
  k.sk_ = read_bits(in);
  k.glwe_sk_ = read_bits(in);
  k.pk_ = read_u64s(in);
  in.expect_end();
  if (k.sk_.size() != static_cast<std::size_t>(params.lwe_dim) ||
      k.glwe_sk_.size() != static_cast<std::size_t>(params.ring_dim) ||
      k.pk_.size() != static_cast<std::size_t>(params.pk_rows) * (params.lwe_dim + 1))
    throw IoError("client key shape mismatch");
  if (key_fingerprint(params, k.sk_) != k.key_id_) throw KeyError("client key id mismatch");
  k.rng_ = Rng(encryption_seed(params.rng_seed));
  return k;
}

// ---------------------------------------------------------------- keygen

KeyMaterial keygen(const CryptoParams& params) {
  params.validate();
  auto pp = std::make_shared<const CryptoParams>(params);
  const auto& p = *pp;
  Rng rng(p.rng_seed);
  std::size_t n = static_cast<std::size_t>(p.lwe_dim);
  std::size_t big_n = static_cast<std::size_t>(p.ring_dim);

  KeyMaterial km;
  ClientKey& ck = km.client;
  ck.params_ = pp;
  ck.sk_ = binary_key(n, rng);
  ck.glwe_sk_ = binary_key(big_n, rng);
  ck.key_id_ = key_fingerprint(p, ck.sk_);
  u64 ring_id = key_fingerprint(p, ck.glwe_sk_);

  double pk_noise = std::floor(p.fresh_noise / p.pk_rows);
  std::size_t row = n + 1;
  ck.pk_.resize(static_cast<std::size_t>(p.pk_rows) * row);
  for (int r = 0; r < p.pk_rows; ++r) {
    u64* dst = &ck.pk_[r * row];
    for (std::size_t i = 0; i < n; ++i) dst[i] = rng.next();
    dst[n] = dot(dst, ck.sk_) + noise_sample(rng, pk_noise);
  }

  // Bootstrapping key: for each LWE key bit s_i, 2*levels GLWE encryptions of
  // zero under the ring key, with s_i * q/B^j added to the mask (first
  // `levels` rows) or to the body (last `levels` rows).
  auto data = std::make_shared<ServerKey::Data>();
  data->params = pp;
  data->key_id = ck.key_id_;
  data->ring_key_id = ring_id;
  int levels = p.bsk_decomp.levels;
  std::size_t rows = 2 * static_cast<std::size_t>(levels);
  data->bsk.resize(n * rows * 2 * big_n);
  std::vector<std::int64_t> s_small(ck.glwe_sk_.begin(), ck.glwe_sk_.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < rows; ++r) {
      u64* mask = &data->bsk[((i * rows + r) * 2 + 0) * big_n];
      u64* body = mask + big_n;
      for (std::size_t j = 0; j < big_n; ++j) mask[j] = rng.next();
      for (std::size_t j = 0; j < big_n; ++j) body[j] = noise_sample(rng, p.bsk_noise);
      negacyclic_mul_add(s_small, torus_spectrum({mask, big_n}), {body, big_n});
      int level = static_cast<int>(r % levels) + 1;
      u64 g = ck.sk_[i] << (64 - level * p.bsk_decomp.base_log);
      if (r < static_cast<std::size_t>(levels))
        mask[0] += g;
      else
        body[0] += g;
    }
  }
  data->ksk = LweKeySwitchKey::generate(ck.glwe_sk_, ring_id, ck.sk_, ck.key_id_, p, rng);
  km.server.data_ = std::move(data);
  ck.rng_ = Rng(encryption_seed(p.rng_seed));
  return km;
}

}  // namespace pql3::fhe
