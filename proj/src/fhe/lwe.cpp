#include "pql3/fhe/lwe.hpp"

#include <bit>

#include "pql3/common/error.hpp"
#include "pql3/fhe/lut.hpp"

namespace pql3::fhe {

void LweCiphertext::serialize(ByteWriter& w) const {
  w.u32(kVersion);
  w.u16(static_cast<std::uint16_t>(a.size()));
  w.u8(static_cast<std::uint8_t>(params ? params->log2q : 64));
  w.u8(static_cast<std::uint8_t>(plaintext_space));
  for (u64 x : a) w.u64(x);
  w.u64(b);
  w.f64(noise.magnitude);
}

Bytes LweCiphertext::serialize() const {
  ByteWriter w;
  serialize(w);
  return w.take();
}

LweCiphertext LweCiphertext::deserialize(ByteReader& in, ParamsPtr params, u64 key_id) {
  if (in.u32() != kVersion) throw IoError("ciphertext version mismatch");
  LweCiphertext c;
  std::size_t n = in.u16();
  int log2q = in.u8();
  c.plaintext_space = in.u8();
  if (params) {
    if (log2q != params->log2q) throw IncompatibleError("ciphertext modulus mismatch");
    if (n != static_cast<std::size_t>(params->lwe_dim)) throw IncompatibleError("ciphertext dimension mismatch");
    if (c.plaintext_space > params->total_bits()) throw IoError("plaintext space exceeds parameters");
  }
  c.a.resize(n);
  for (auto& x : c.a) x = in.u64();
  c.b = in.u64();
  c.noise.magnitude = in.f64();
  if (!(c.noise.magnitude >= 0)) throw IoError("invalid noise magnitude");
  c.key_id = key_id;
  c.params = std::move(params);
  return c;
}

LweCiphertext trivial(ParamsPtr params, u64 key_id, std::size_t n, u64 m, int space) {
  LweCiphertext c;
  c.a.assign(n, 0);
  c.b = m * params->delta();
  c.plaintext_space = space;
  c.key_id = key_id;
  c.params = std::move(params);
  return c;
}

LookupTable::LookupTable(std::vector<u64> entries, int input_bits)
    : entries_(std::move(entries)), input_bits_(input_bits) {
  if (input_bits < 0 || input_bits > 24) throw ShapeError("LUT input width out of range");
  if (entries_.size() != (std::size_t{1} << input_bits))
    throw ShapeError("LUT must have 2^input_bits entries");
}

LookupTable LookupTable::from_function(int input_bits, const std::function<u64(u64)>& g) {
  std::vector<u64> e(std::size_t{1} << input_bits);
  for (u64 m = 0; m < e.size(); ++m) e[m] = g(m);
  return {std::move(e), input_bits};
}

LookupTable LookupTable::identity(int input_bits) {
  return from_function(input_bits, [](u64 m) { return m; });
}

int LookupTable::output_bits() const {
  u64 mx = 0;
  for (u64 e : entries_) mx = std::max(mx, e);
  return std::max(1, static_cast<int>(std::bit_width(mx)));
}

std::vector<u64> LookupTable::test_polynomial(const CryptoParams& p) const {
  std::size_t n = static_cast<std::size_t>(p.ring_dim);
  std::size_t slot = 2 * n / p.plaintext_modulus();
  u64 pmod = p.plaintext_modulus();
  u64 delta = p.delta();
  std::vector<u64> v(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t idx = std::min(j / slot, entries_.size() - 1);
    v[j] = (entries_[idx] % pmod) * delta;
  }
  return v;
}

}  // namespace pql3::fhe
