#include "pql3/fhe/ops.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>

#include "pql3/common/error.hpp"

namespace pql3::fhe {

namespace {

void check_pair(const LweCiphertext& x, const LweCiphertext& y) {
  if (!x.params || !y.params) throw IncompatibleError("ciphertext without parameters");
  if (x.key_id != y.key_id || x.a.size() != y.a.size())
    throw IncompatibleError("ciphertexts under different keys or parameters");
}

int bits_for(u64 v) { return std::max(1, static_cast<int>(std::bit_width(v))); }

u64 residue(std::int64_t v, const CryptoParams& p) {
  return static_cast<u64>(v) & (p.plaintext_modulus() - 1);
}

std::uint32_t bump(std::uint32_t a, std::uint32_t b = 0) { return std::max(a, b) + 1; }

}  // namespace

LweCiphertext add_ct(const LweCiphertext& x, const LweCiphertext& y) {
  check_pair(x, y);
  LweCiphertext out = x;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += y.a[i];
  out.b += y.b;
  out.noise = {x.noise.magnitude + y.noise.magnitude, bump(x.noise.ops_since_refresh, y.noise.ops_since_refresh)};
  out.plaintext_space = std::min(std::max(x.plaintext_space, y.plaintext_space) + 1, x.params->total_bits());
  return out;
}

LweCiphertext sub_ct(const LweCiphertext& x, const LweCiphertext& y) {
  check_pair(x, y);
  LweCiphertext out = x;
  for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] -= y.a[i];
  out.b -= y.b;
  out.noise = {x.noise.magnitude + y.noise.magnitude, bump(x.noise.ops_since_refresh, y.noise.ops_since_refresh)};
  out.plaintext_space = x.params->total_bits();
  return out;
}

LweCiphertext neg_ct(const LweCiphertext& x) {
  LweCiphertext out = x;
  for (auto& v : out.a) v = u64{0} - v;
  out.b = u64{0} - out.b;
  out.noise.ops_since_refresh = bump(x.noise.ops_since_refresh);
  out.plaintext_space = x.params->total_bits();
  return out;
}

LweCiphertext add_pt(const LweCiphertext& x, std::int64_t m) {
  const auto& p = *x.params;
  LweCiphertext out = x;
  out.b += residue(m, p) * p.delta();
  out.noise.ops_since_refresh = bump(x.noise.ops_since_refresh);
  if (m >= 0) {
    u64 hi = ((u64{1} << x.plaintext_space) - 1) + static_cast<u64>(m);
    out.plaintext_space = std::min(bits_for(hi), p.total_bits());
  } else {
    out.plaintext_space = p.total_bits();
  }
  return out;
}

LweCiphertext mul_pt(const LweCiphertext& x, std::int64_t k) {
  const auto& p = *x.params;
  u64 mag = static_cast<u64>(std::llabs(k));
  u64 hi = ((u64{1} << x.plaintext_space) - 1) * mag;
  if (mag != 0 && (hi / mag != (u64{1} << x.plaintext_space) - 1 || hi >= p.plaintext_modulus()))
    throw RangeError("mul_pt by " + std::to_string(k) + " overflows the " + std::to_string(p.total_bits()) +
                     "-bit space");
  LweCiphertext out = x;
  u64 f = static_cast<u64>(k);
  for (auto& v : out.a) v *= f;
  out.b *= f;
  out.noise = {x.noise.magnitude * static_cast<double>(mag), bump(x.noise.ops_since_refresh)};
  out.plaintext_space = k < 0 ? p.total_bits() : bits_for(hi);
  return out;
}

LweCiphertext linear_combination(std::span<const LweCiphertext* const> xs, std::span<const std::int64_t> w,
                                 std::int64_t constant, int result_bits) {
  if (xs.empty() || xs.size() != w.size()) throw ShapeError("linear combination needs matching inputs and weights");
  const auto& p = *xs[0]->params;
  if (result_bits < 0 || result_bits > p.total_bits()) throw RangeError("result width out of range");
  LweCiphertext out;
  out.a.assign(xs[0]->a.size(), 0);
  out.params = xs[0]->params;
  out.key_id = xs[0]->key_id;
  double noise = 0;
  std::uint32_t ops = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_pair(*xs[0], *xs[i]);
    if (w[i] == 0) continue;
    u64 f = static_cast<u64>(w[i]);
    for (std::size_t j = 0; j < out.a.size(); ++j) out.a[j] += f * xs[i]->a[j];
    out.b += f * xs[i]->b;
    noise += static_cast<double>(std::llabs(w[i])) * xs[i]->noise.magnitude;
    ops = std::max(ops, xs[i]->noise.ops_since_refresh);
  }
  out.b += residue(constant, p) * p.delta();
  out.noise = {noise, ops + 1};
  out.plaintext_space = result_bits;
  return out;
}

LweCiphertext with_space(LweCiphertext x, int bits) {
  if (bits < 0 || bits > x.params->total_bits()) throw RangeError("width out of range");
  x.plaintext_space = bits;
  return x;
}

LweCiphertext pbs(const LweCiphertext& x, const LookupTable& g, const PbsEngine& engine) { return engine.run(x, g); }

// ---------------------------------------------------------------- quarter square

QuarterSquare QuarterSquare::make(std::int64_t lo1, std::int64_t hi1, std::int64_t lo2, std::int64_t hi2,
                                  const CryptoParams& p) {
  if (lo1 > hi1 || lo2 > hi2) throw RangeError("empty operand range");
  QuarterSquare q;
  q.lo1 = lo1;
  q.hi1 = hi1;
  q.lo2 = lo2;
  q.hi2 = hi2;
  q.sum_offset = lo1 + lo2;
  q.diff_offset = lo1 - hi2;
  u64 span = static_cast<u64>((hi1 - lo1) + (hi2 - lo2));
  int bits = bits_for(span);
  if (bits > p.total_bits() - 1)
    throw RangeError("product operands too wide: argument span " + std::to_string(span) + " needs " +
                     std::to_string(bits) + " bits, padded space has " + std::to_string(p.total_bits() - 1));
  auto square_table = [&](std::int64_t offset) {
    return LookupTable::from_function(bits, [&](u64 t) {
      std::int64_t s = static_cast<std::int64_t>(t) + offset;
      return residue((s * s) / 4, p);
    });
  };
  q.sum_table = square_table(q.sum_offset);
  q.diff_table = square_table(q.diff_offset);
  std::int64_t corners[] = {lo1 * lo2, lo1 * hi2, hi1 * lo2, hi1 * hi2};
  std::int64_t mn = *std::min_element(std::begin(corners), std::end(corners));
  std::int64_t mx = *std::max_element(std::begin(corners), std::end(corners));
  q.out_bits = mn < 0 ? p.total_bits() : std::min(bits_for(static_cast<u64>(mx)), p.total_bits());
  return q;
}

u64 QuarterSquare::clear(u64 x, u64 y, const CryptoParams& p) const {
  u64 mask = p.plaintext_modulus() - 1;
  u64 u = (x + y - static_cast<u64>(sum_offset)) & mask;
  u64 v = (x - y - static_cast<u64>(diff_offset)) & mask;
  if (u >= sum_table.entries().size() || v >= diff_table.entries().size())
    throw RangeError("operand outside the declared product range");
  return (sum_table(u) - diff_table(v)) & mask;
}

LweCiphertext QuarterSquare::apply(const LweCiphertext& x, const LweCiphertext& y, const PbsEngine& engine) const {
  const LweCiphertext* both[] = {&x, &y};
  const std::int64_t plus[] = {1, 1};
  const std::int64_t minus[] = {1, -1};
  auto s = linear_combination(both, plus, -sum_offset, sum_table.input_bits());
  auto d = linear_combination(both, minus, -diff_offset, diff_table.input_bits());
  auto sq_s = engine.run(s, sum_table);
  auto sq_d = engine.run(d, diff_table);
  const LweCiphertext* parts[] = {&sq_s, &sq_d};
  return linear_combination(parts, minus, 0, out_bits);
}

LweCiphertext mul_ct(const LweCiphertext& x, const LweCiphertext& y, const PbsEngine& engine) {
  check_pair(x, y);
  const auto& p = *x.params;
  auto hi = [](int w) { return static_cast<std::int64_t>((u64{1} << w) - 1); };
  auto q = QuarterSquare::make(0, hi(x.plaintext_space), 0, hi(y.plaintext_space), p);
  auto out = q.apply(with_space(x, x.plaintext_space), y, engine);
  return out;
}

LweCiphertext keyswitch(const LweCiphertext& x, const LweKeySwitchKey& ksk) {
  if (ksk.empty()) throw KeyError("empty keyswitch key");
  if (x.key_id != ksk.source_id()) throw KeyError("ciphertext is not under the keyswitch source key");
  if (x.a.size() != static_cast<std::size_t>(ksk.input_dim())) throw KeyError("keyswitch dimension mismatch");
  LweCiphertext out;
  ksk.apply(x.a.data(), x.b, out.a, out.b);
  out.noise = {x.noise.magnitude + ksk.added_noise(), bump(x.noise.ops_since_refresh)};
  out.plaintext_space = x.plaintext_space;
  out.key_id = ksk.target_id();
  out.params = x.params;
  return out;
}

}  // namespace pql3::fhe
