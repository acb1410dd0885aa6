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

namespace {
constexpr std::size_t kFourierCacheLimit = std::size_t{256} << 20;
}  // namespace

namespace detail {

u64 dot(const u64* a, const std::vector<u64>& s) {
  u64 acc = 0;
  for (std::size_t i = 0; i < s.size(); ++i) acc += a[i] * s[i];
  return acc;
}

u64 noise_sample(Rng& rng, double mag) { return static_cast<u64>(rng.symmetric(static_cast<u64>(mag))); }

void write_bits(ByteWriter& w, const std::vector<u64>& bits) {
  w.u32(static_cast<std::uint32_t>(bits.size()));
  for (u64 b : bits) w.u8(static_cast<std::uint8_t>(b));
}

std::vector<u64> read_bits(ByteReader& in) {
  std::vector<u64> bits(in.u32());
  for (auto& b : bits) {
    b = in.u8();
    if (b > 1) throw IoError("non-binary key coefficient");
  }
  return bits;
}

void write_u64s(ByteWriter& w, std::span<const u64> v) {
  w.u64(v.size());
  for (u64 x : v) w.u64(x);
}

std::vector<u64> read_u64s(ByteReader& in) {
  u64 n = in.u64();
  if (n > in.remaining() / 8) throw IoError("truncated vector");
  std::vector<u64> v(n);
  for (auto& x : v) x = in.u64();
  return v;
}

}  // namespace detail

using namespace detail;

u64 key_fingerprint(const CryptoParams& p, const std::vector<u64>& bits) {
  auto fp = p.fingerprint();
  Bytes buf(fp.begin(), fp.end());
  for (u64 b : bits) buf.push_back(static_cast<std::uint8_t>(b));
  std::uint8_t h[32];
  SHA256(buf.data(), buf.size(), h);
  u64 id = 0;
  std::memcpy(&id, h, 8);
  return id;
}

// ---------------------------------------------------------------- keyswitch

LweKeySwitchKey LweKeySwitchKey::generate(const std::vector<u64>& in_key, u64 in_id,
                                          const std::vector<u64>& out_key, u64 out_id,
                                          const CryptoParams& p, Rng& rng) {
  LweKeySwitchKey k;
  k.in_dim_ = static_cast<int>(in_key.size());
  k.out_dim_ = static_cast<int>(out_key.size());
  k.decomp_ = p.ks_decomp;
  k.source_id_ = in_id;
  k.target_id_ = out_id;
  k.added_noise_ = p.keyswitch_noise(k.in_dim_);
  std::size_t row = static_cast<std::size_t>(k.out_dim_) + 1;
  int levels = k.decomp_.levels;
  k.data_.resize(static_cast<std::size_t>(k.in_dim_) * levels * row);
  for (int i = 0; i < k.in_dim_; ++i) {
    for (int j = 0; j < levels; ++j) {
      u64* r = &k.data_[(static_cast<std::size_t>(i) * levels + j) * row];
      for (int t = 0; t < k.out_dim_; ++t) r[t] = rng.next();
      u64 msg = in_key[i] << (64 - (j + 1) * k.decomp_.base_log);
      r[k.out_dim_] = dot(r, out_key) + noise_sample(rng, p.ksk_noise) + msg;
    }
  }
  return k;
}

void LweKeySwitchKey::apply(const u64* a, u64 b, std::vector<u64>& out_a, u64& out_b) const {
  std::size_t row = static_cast<std::size_t>(out_dim_) + 1;
  int levels = decomp_.levels;
  std::vector<u64> acc(row, 0);
  acc[out_dim_] = b;
  std::int64_t digits[64];
  for (int i = 0; i < in_dim_; ++i) {
    decompose(a[i], decomp_.base_log, levels, digits);
    for (int j = 0; j < levels; ++j) {
      if (digits[j] == 0) continue;
      u64 d = static_cast<u64>(digits[j]);
      const u64* r = &data_[(static_cast<std::size_t>(i) * levels + j) * row];
      for (std::size_t t = 0; t < row; ++t) acc[t] -= d * r[t];
    }
  }
  out_b = acc[out_dim_];
  acc.pop_back();
  out_a = std::move(acc);
}

void LweKeySwitchKey::serialize(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(in_dim_));
  w.u32(static_cast<std::uint32_t>(out_dim_));
  w.u8(static_cast<std::uint8_t>(decomp_.base_log));
  w.u8(static_cast<std::uint8_t>(decomp_.levels));
  w.u64(source_id_);
  w.u64(target_id_);
  w.f64(added_noise_);
  write_u64s(w, data_);
}

LweKeySwitchKey LweKeySwitchKey::deserialize(ByteReader& in) {
  LweKeySwitchKey k;
  k.in_dim_ = static_cast<int>(in.u32());
  k.out_dim_ = static_cast<int>(in.u32());
  k.decomp_.base_log = in.u8();
  k.decomp_.levels = in.u8();
  k.source_id_ = in.u64();
  k.target_id_ = in.u64();
  k.added_noise_ = in.f64();
  k.data_ = read_u64s(in);
  if (k.data_.size() != static_cast<std::size_t>(k.in_dim_) * k.decomp_.levels * (k.out_dim_ + 1))
    throw IoError("keyswitch key size mismatch");
  return k;
}

// ---------------------------------------------------------------- server key



namespace {
ServerKey::Data& need(const std::shared_ptr<ServerKey::Data>& d) {
  if (!d) throw KeyError("missing evaluation key");
  return *d;
}
}  // namespace

const CryptoParams& ServerKey::params() const { return *need(data_).params; }
ParamsPtr ServerKey::params_ptr() const { return need(data_).params; }
u64 ServerKey::key_id() const { return need(data_).key_id; }
u64 ServerKey::ring_key_id() const { return need(data_).ring_key_id; }
const LweKeySwitchKey& ServerKey::ksk() const { return need(data_).ksk; }
std::span<const u64> ServerKey::bsk() const { return need(data_).bsk; }

const FourierBsk* ServerKey::fourier() const {
  auto& d = need(data_);
  const auto& p = *d.params;
  std::size_t bytes = static_cast<std::size_t>(p.lwe_dim) * 2 * p.bsk_decomp.levels * 2 * kLimbs *
                      (p.ring_dim / 2) * sizeof(cplx);
  if (bytes > kFourierCacheLimit) return nullptr;
  std::call_once(d.fourier_once, [&] { d.fourier = std::make_unique<FourierBsk>(FourierBsk::build(*this)); });
  return d.fourier.get();
}

Bytes ServerKey::serialize() const {
  auto& d = need(data_);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(KeyRole::ServerEvaluation));
  w.u8(kKeyVersion);
  w.blob(d.params->serialize());
  w.u64(d.key_id);
  w.u64(d.ring_key_id);
  write_u64s(w, d.bsk);
  d.ksk.serialize(w);
  return w.take();
}

ServerKey ServerKey::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto role = in.u8();
  if (role == static_cast<std::uint8_t>(KeyRole::ClientSecret))
    throw KeyError("client-secret key material rejected on the server path");
  if (role != static_cast<std::uint8_t>(KeyRole::ServerEvaluation)) throw KeyError("unknown key role");
  if (in.u8() != kKeyVersion) throw IoError("server key version mismatch");
  auto d = std::make_shared<Data>();
  auto pb = in.blob();
  ByteReader pin(pb);
  auto params = CryptoParams::deserialize(pin);
  params.validate();
  d->params = std::make_shared<const CryptoParams>(params);
  d->key_id = in.u64();
  d->ring_key_id = in.u64();
  d->bsk = read_u64s(in);
  d->ksk = LweKeySwitchKey::deserialize(in);
  in.expect_end();
  std::size_t expect = static_cast<std::size_t>(params.lwe_dim) * 2 * params.bsk_decomp.levels * 2 *
                       params.ring_dim;
  if (d->bsk.size() != expect) throw IoError("bootstrapping key size mismatch");
  if (d->ksk.input_dim() != params.ring_dim || d->ksk.output_dim() != params.lwe_dim ||
      d->ksk.source_id() != d->ring_key_id || d->ksk.target_id() != d->key_id)
    throw IoError("keyswitch key does not match the bootstrapping key");
  ServerKey k;
  k.data_ = std::move(d);
  return k;
}

}  // namespace pql3::fhe
