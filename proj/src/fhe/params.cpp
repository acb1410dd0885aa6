#include "pql3/fhe/params.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cmath>
#include <string>

#include "pql3/common/error.hpp"

namespace pql3::fhe {

namespace {

constexpr double kTwo64 = 18446744073709551616.0;

double pow2(int e) { return std::ldexp(1.0, e); }

}  // namespace

double CryptoParams::delta_f() const { return pow2(log2q - total_bits()); }

double CryptoParams::decrypt_budget() const { return delta_f() / 2; }

double CryptoParams::drift_units() const {
  double worst = (lwe_dim + 1) / 2.0;
  if (drift == DriftModel::WorstCase) return worst;
  double sigma = 1.0 + 6.0 * std::sqrt((lwe_dim + 1) / 12.0);
  return std::min(worst, sigma);
}

double CryptoParams::pbs_budget() const {
  double unit = pow2(log2q) / (2.0 * ring_dim);
  return decrypt_budget() - drift_units() * unit;
}

double CryptoParams::keyswitch_noise(int input_dim) const {
  double base = pow2(ks_decomp.base_log);
  double precision = pow2(ks_decomp.base_log * ks_decomp.levels);
  return input_dim * ks_decomp.levels * (base / 2) * ksk_noise +
         input_dim * kTwo64 / (2 * precision);
}

double CryptoParams::pbs_noise() const {
  double base = pow2(bsk_decomp.base_log);
  double precision = pow2(bsk_decomp.base_log * bsk_decomp.levels);
  double ext = 2.0 * bsk_decomp.levels * ring_dim * (base / 2) * bsk_noise +
               (ring_dim + 1) * kTwo64 / (2 * precision);
  return lwe_dim * ext + keyswitch_noise(ring_dim);
}

void CryptoParams::validate() const {
  if (plaintext_bits < 1 || carry_bits < 0) throw ParameterError("plaintext/carry widths out of range");
  if (log2q <= total_bits() + 2)
    throw ParameterError("modulus too small: log2(q)=" + std::to_string(log2q) +
                         " must exceed plaintext+carry+2=" + std::to_string(total_bits() + 2));
  if (log2q != 64) throw ParameterError("only the 64-bit wrapping modulus is implemented");
  if (ring_dim < 4 || !std::has_single_bit(static_cast<unsigned>(ring_dim)))
    throw ParameterError("ring_dim must be a power of two >= 4");
  if (lwe_dim < 1 || lwe_dim > 65535) throw ParameterError("lwe_dim out of range");
  if (static_cast<u64>(ring_dim) < plaintext_modulus())
    throw ParameterError("ring_dim smaller than the plaintext modulus");
  if (!(fresh_noise >= 1) || fresh_noise >= decrypt_budget())
    throw ParameterError("fresh noise must satisfy 1 <= E0 < Delta/2");
  if (bsk_decomp.base_log < 1 || bsk_decomp.levels < 1 || bsk_decomp.base_log * bsk_decomp.levels > 63 ||
      ks_decomp.base_log < 1 || ks_decomp.levels < 1 || ks_decomp.base_log * ks_decomp.levels > 63)
    throw ParameterError("decomposition out of range");
  if (bsk_decomp.base_log > 16) throw ParameterError("bsk base too large for exact FFT products");
  if (pk_rows < 1) throw ParameterError("public key needs at least one row");
  if (pbs_budget() <= 0) throw ParameterError("ring too small: mod-switch drift exceeds the slot");
  if (pbs_noise() > 2 * fresh_noise) throw ParameterError("bootstrapped noise exceeds 2*E0");
}

Bytes CryptoParams::serialize() const {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(lwe_dim));
  w.u32(static_cast<std::uint32_t>(ring_dim));
  w.u8(static_cast<std::uint8_t>(log2q));
  w.u8(static_cast<std::uint8_t>(plaintext_bits));
  w.u8(static_cast<std::uint8_t>(carry_bits));
  w.f64(fresh_noise);
  w.u64(rng_seed);
  w.u8(static_cast<std::uint8_t>(bsk_decomp.base_log));
  w.u8(static_cast<std::uint8_t>(bsk_decomp.levels));
  w.u8(static_cast<std::uint8_t>(ks_decomp.base_log));
  w.u8(static_cast<std::uint8_t>(ks_decomp.levels));
  w.f64(bsk_noise);
  w.f64(ksk_noise);
  w.u32(static_cast<std::uint32_t>(pk_rows));
  w.u8(static_cast<std::uint8_t>(drift));
  return w.take();
}

CryptoParams CryptoParams::deserialize(ByteReader& in) {
  CryptoParams p;
  p.lwe_dim = in.u16();
  p.ring_dim = static_cast<int>(in.u32());
  p.log2q = in.u8();
  p.plaintext_bits = in.u8();
  p.carry_bits = in.u8();
  p.fresh_noise = in.f64();
  p.rng_seed = in.u64();
  p.bsk_decomp.base_log = in.u8();
  p.bsk_decomp.levels = in.u8();
  p.ks_decomp.base_log = in.u8();
  p.ks_decomp.levels = in.u8();
  p.bsk_noise = in.f64();
  p.ksk_noise = in.f64();
  p.pk_rows = static_cast<int>(in.u32());
  auto d = in.u8();
  if (d > 1) throw ParameterError("unknown drift model");
  p.drift = static_cast<DriftModel>(d);
  return p;
}

std::array<std::uint8_t, 32> CryptoParams::fingerprint() const {
  CryptoParams copy = *this;
  copy.rng_seed = 0;
  Bytes b = copy.serialize();
  std::array<std::uint8_t, 32> out{};
  SHA256(b.data(), b.size(), out.data());
  return out;
}

CryptoParams CryptoParams::derive(int lwe_dim, int plaintext_bits, int carry_bits, DriftModel drift,
                                  u64 seed) {
  CryptoParams p;
  p.lwe_dim = lwe_dim;
  p.plaintext_bits = plaintext_bits;
  p.carry_bits = carry_bits;
  p.drift = drift;
  p.rng_seed = seed;
  p.pk_rows = 2 * (lwe_dim + 1);
  // Half a message slot spans ring_dim/p' drift units; keep at least two spare
  // units for noise.
  double units = p.drift_units();
  auto slots = std::bit_ceil(static_cast<unsigned>(std::floor(units)) + 2);
  p.ring_dim = static_cast<int>(p.plaintext_modulus() * slots);
  if (p.ring_dim < 4) p.ring_dim = 4;
  double epbs = p.pbs_noise();
  p.fresh_noise = pow2(static_cast<int>(std::ceil(std::log2(epbs / 2))));
  p.validate();
  return p;
}

CryptoParams CryptoParams::micro(int plaintext_bits, int carry_bits, u64 seed) {
  return derive(16, plaintext_bits, carry_bits, DriftModel::WorstCase, seed);
}

CryptoParams CryptoParams::toy(int plaintext_bits, int carry_bits, u64 seed) {
  return derive(512, plaintext_bits, carry_bits, DriftModel::SixSigma, seed);
}

}  // namespace pql3::fhe
