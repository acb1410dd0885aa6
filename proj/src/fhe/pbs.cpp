#include "pql3/fhe/pbs.hpp"

#include <algorithm>
#include <bit>

#include "pql3/common/error.hpp"
#include "pql3/fhe/decompose.hpp"
#include "pql3/fhe/fourier_bsk.hpp"
#include "pql3/fhe/poly.hpp"

namespace pql3::fhe {

namespace {
std::atomic<std::uint64_t> g_pbs_count{0};
}

std::uint64_t global_pbs_count() { return g_pbs_count.load(); }

LweCiphertext PbsEngine::run(const LweCiphertext& c, const LookupTable& g) const {
  const auto& p = params();
  if (c.key_id != key_id()) throw KeyError("ciphertext key does not match the evaluation key");
  if (c.a.size() != static_cast<std::size_t>(p.lwe_dim)) throw IncompatibleError("ciphertext dimension mismatch");
  if (c.plaintext_space > p.total_bits() - 1)
    throw RangeError("PBS input needs one bit of padding: space " + std::to_string(c.plaintext_space) +
                     " > " + std::to_string(p.total_bits() - 1));
  if (g.input_bits() != c.plaintext_space)
    throw ShapeError("LUT has " + std::to_string(g.entries().size()) + " entries, ciphertext space is 2^" +
                     std::to_string(c.plaintext_space));
  for (u64 e : g.entries())
    if (e >= p.plaintext_modulus()) throw RangeError("LUT entry exceeds the plaintext modulus");
  if (c.noise.magnitude >= p.pbs_budget())
    throw BudgetExhausted("PBS input noise " + std::to_string(c.noise.magnitude) + " exceeds budget " +
                          std::to_string(p.pbs_budget()));
  LweCiphertext out = bootstrap(c, g);
  out.noise = {p.pbs_noise(), 0};
  out.plaintext_space = std::min(g.output_bits(), p.total_bits());
  out.key_id = key_id();
  out.params = params_ptr();
  count_.fetch_add(1, std::memory_order_relaxed);
  g_pbs_count.fetch_add(1, std::memory_order_relaxed);
  return out;
}

// ---------------------------------------------------------------- fourier key

FourierBsk FourierBsk::build(const ServerKey& key) {
  const auto& p = key.params();
  std::size_t n = static_cast<std::size_t>(p.lwe_dim);
  std::size_t big_n = static_cast<std::size_t>(p.ring_dim);
  FourierBsk f;
  f.rows = 2 * static_cast<std::size_t>(p.bsk_decomp.levels);
  f.half = big_n / 2;
  f.data.resize(n * f.rows * 2 * kLimbs * f.half);
  auto bsk = key.bsk();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < f.rows; ++r)
      for (int col = 0; col < 2; ++col) {
        auto spec = torus_spectrum(bsk.subspan(((i * f.rows + r) * 2 + col) * big_n, big_n));
        for (int l = 0; l < kLimbs; ++l)
          std::copy(spec.limb[l].begin(), spec.limb[l].end(),
                    f.data.begin() + static_cast<std::ptrdiff_t>(f.at(i, r, col, l) - f.data.data()));
      }
  return f;
}

// ---------------------------------------------------------------- blind rotation

namespace {

struct Accumulator {
  std::vector<u64> mask, body;
};

class BlindRotator {
 public:
  explicit BlindRotator(const ServerKey& key)
      : key_(key),
        p_(key.params()),
        n_(static_cast<std::size_t>(p_.ring_dim)),
        half_(n_ / 2),
        levels_(p_.bsk_decomp.levels),
        rows_(2 * static_cast<std::size_t>(levels_)),
        fft_(NegacyclicFft::get(n_)),
        fourier_(key.fourier()) {
    rot_mask_.resize(n_);
    rot_body_.resize(n_);
    digits_.resize(rows_ * n_);
    dspec_.resize(rows_ * half_);
    for (auto& col : out_)
      for (auto& l : col) l.resize(half_);
  }

  // acc <- acc + bsk_i (x) ((X^k - 1) * acc)
  void cmux(Accumulator& acc, std::size_t bit, std::size_t k) {
    rotate(acc.mask, k, rot_mask_);
    rotate(acc.body, k, rot_body_);
    for (std::size_t j = 0; j < n_; ++j) {
      rot_mask_[j] -= acc.mask[j];
      rot_body_[j] -= acc.body[j];
    }
    std::int64_t d[64];
    for (std::size_t j = 0; j < n_; ++j) {
      decompose(rot_mask_[j], p_.bsk_decomp.base_log, levels_, d);
      for (int l = 0; l < levels_; ++l) digits_[l * n_ + j] = d[l];
      decompose(rot_body_[j], p_.bsk_decomp.base_log, levels_, d);
      for (int l = 0; l < levels_; ++l) digits_[(levels_ + l) * n_ + j] = d[l];
    }
    for (std::size_t r = 0; r < rows_; ++r)
      fft_.forward(std::span<const std::int64_t>(&digits_[r * n_], n_), std::span<cplx>(&dspec_[r * half_], half_));

    for (auto& col : out_)
      for (auto& l : col) std::fill(l.begin(), l.end(), cplx{});
    for (std::size_t r = 0; r < rows_; ++r) {
      const cplx* ds = &dspec_[r * half_];
      for (int col = 0; col < 2; ++col) {
        for (int l = 0; l < kLimbs; ++l) {
          const cplx* ks = key_spectrum(bit, r, col, l);
          cplx* o = out_[col][l].data();
          for (std::size_t t = 0; t < half_; ++t) o[t] += ds[t] * ks[t];
        }
      }
    }
    fold_limbs(fft_, out_[0], acc.mask, scratch_);
    fold_limbs(fft_, out_[1], acc.body, scratch_);
  }

 private:
  const cplx* key_spectrum(std::size_t bit, std::size_t row, int col, int limb) {
    if (fourier_) return fourier_->at(bit, row, col, limb);
    // No cache: transform this GGSW row on the fly (once per row and column).
    if (limb == 0) {
      auto bsk = key_.bsk();
      onfly_[col] = torus_spectrum(bsk.subspan(((bit * rows_ + row) * 2 + col) * n_, n_));
    }
    return onfly_[col].limb[limb].data();
  }

  const ServerKey& key_;
  const CryptoParams& p_;
  std::size_t n_, half_;
  int levels_;
  std::size_t rows_;
  const NegacyclicFft& fft_;
  const FourierBsk* fourier_;
  std::vector<u64> rot_mask_, rot_body_;
  std::vector<std::int64_t> digits_;
  std::vector<cplx> dspec_;
  std::vector<cplx> out_[2][kLimbs];
  std::vector<double> scratch_;
  TorusSpectrum onfly_[2];
};

}  // namespace

LweCiphertext BlindRotatePbs::bootstrap(const LweCiphertext& c, const LookupTable& g) const {
  const auto& p = key_.params();
  std::size_t big_n = static_cast<std::size_t>(p.ring_dim);
  int shift = 64 - std::countr_zero(2 * big_n);
  auto switch_mod = [&](u64 x) -> std::size_t { return static_cast<std::size_t>((x + (u64{1} << (shift - 1))) >> shift); };

  // Half a slot of offset turns rounding into flooring of the table index.
  std::size_t b_bar = switch_mod(c.b + p.delta() / 2);
  std::vector<u64> tv = g.test_polynomial(p);
  Accumulator acc;
  acc.mask.assign(big_n, 0);
  acc.body.resize(big_n);
  rotate(tv, (2 * big_n - b_bar) % (2 * big_n), acc.body);

  BlindRotator br(key_);
  for (std::size_t i = 0; i < c.a.size(); ++i) {
    std::size_t a_bar = switch_mod(c.a[i]);
    if (a_bar == 0) continue;
    br.cmux(acc, i, a_bar);
  }

  // Sample-extract the constant coefficient under the ring key.
  std::vector<u64> ext(big_n);
  ext[0] = acc.mask[0];
  for (std::size_t j = 1; j < big_n; ++j) ext[j] = u64{0} - acc.mask[big_n - j];
  LweCiphertext out;
  key_.ksk().apply(ext.data(), acc.body[0], out.a, out.b);
  return out;
}


}  // namespace pql3::fhe
