#include "pql3/fhe/poly.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "pql3/common/error.hpp"

namespace pql3::fhe {

NegacyclicFft::NegacyclicFft(std::size_t n) : n_(n), m_(n / 2) {
  if (n < 4 || !std::has_single_bit(n)) throw ParameterError("FFT size must be a power of two >= 4");
  twist_.resize(m_);
  itwist_.resize(m_);
  for (std::size_t j = 0; j < m_; ++j) {
    double ang = std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_);
    twist_[j] = {std::cos(ang), std::sin(ang)};
    itwist_[j] = std::conj(twist_[j]) / static_cast<double>(m_);
  }
  // Stage with half-length h stores h twiddles starting at offset h - 1.
  roots_.resize(m_ > 1 ? m_ - 1 : 0);
  iroots_.resize(roots_.size());
  for (std::size_t h = 1; h < m_; h <<= 1) {
    for (std::size_t k = 0; k < h; ++k) {
      double ang = -std::numbers::pi * static_cast<double>(k) / static_cast<double>(h);
      roots_[h - 1 + k] = {std::cos(ang), std::sin(ang)};
      iroots_[h - 1 + k] = std::conj(roots_[h - 1 + k]);
    }
  }
}

const NegacyclicFft& NegacyclicFft::get(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<NegacyclicFft>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<NegacyclicFft>(n);
  return *slot;
}

// Decimation in frequency: natural order in, bit-reversed order out.
void NegacyclicFft::fft_forward(cplx* a) const {
  auto* d = reinterpret_cast<double*>(a);
  for (std::size_t h = m_ / 2; h >= 1; h >>= 1) {
    const auto* w = reinterpret_cast<const double*>(roots_.data() + (h - 1));
    for (std::size_t start = 0; start < m_; start += 2 * h) {
      double* x = d + 2 * start;
      double* y = x + 2 * h;
      for (std::size_t k = 0; k < h; ++k) {
        double ur = x[2 * k], ui = x[2 * k + 1], vr = y[2 * k], vi = y[2 * k + 1];
        double dr = ur - vr, di = ui - vi;
        x[2 * k] = ur + vr;
        x[2 * k + 1] = ui + vi;
        y[2 * k] = dr * w[2 * k] - di * w[2 * k + 1];
        y[2 * k + 1] = dr * w[2 * k + 1] + di * w[2 * k];
      }
    }
  }
}

// Decimation in time: bit-reversed order in, natural order out (unscaled).
void NegacyclicFft::fft_inverse(cplx* a) const {
  auto* d = reinterpret_cast<double*>(a);
  for (std::size_t h = 1; h < m_; h <<= 1) {
    const auto* w = reinterpret_cast<const double*>(iroots_.data() + (h - 1));
    for (std::size_t start = 0; start < m_; start += 2 * h) {
      double* x = d + 2 * start;
      double* y = x + 2 * h;
      for (std::size_t k = 0; k < h; ++k) {
        double vr = y[2 * k] * w[2 * k] - y[2 * k + 1] * w[2 * k + 1];
        double vi = y[2 * k] * w[2 * k + 1] + y[2 * k + 1] * w[2 * k];
        double ur = x[2 * k], ui = x[2 * k + 1];
        x[2 * k] = ur + vr;
        x[2 * k + 1] = ui + vi;
        y[2 * k] = ur - vr;
        y[2 * k + 1] = ui - vi;
      }
    }
  }
}

void NegacyclicFft::forward(std::span<const std::int64_t> in, std::span<cplx> out) const {
  for (std::size_t j = 0; j < m_; ++j)
    out[j] = cplx(static_cast<double>(in[j]), static_cast<double>(in[j + m_])) * twist_[j];
  fft_forward(out.data());
}

void NegacyclicFft::forward(std::span<const double> in, std::span<cplx> out) const {
  for (std::size_t j = 0; j < m_; ++j) out[j] = cplx(in[j], in[j + m_]) * twist_[j];
  fft_forward(out.data());
}

void NegacyclicFft::inverse(std::span<const cplx> in, std::span<double> out) const {
  thread_local std::vector<cplx> buf;
  buf.assign(in.begin(), in.end());
  fft_inverse(buf.data());
  for (std::size_t j = 0; j < m_; ++j) {
    cplx v = buf[j] * itwist_[j];
    out[j] = v.real();
    out[j + m_] = v.imag();
  }
}

namespace {

// Round to nearest for |x| < 2^51 without a libm call.
inline std::int64_t round_exact(double x) {
  constexpr double kMagic = 6755399441055744.0;  // 1.5 * 2^52
  return static_cast<std::int64_t>((x + kMagic) - kMagic);
}

inline std::int64_t sext16(u64 x) { return static_cast<std::int16_t>(static_cast<std::uint16_t>(x)); }

void split_limbs(std::span<const u64> poly, std::vector<std::int64_t> (&limbs)[kLimbs]) {
  std::size_t n = poly.size();
  for (auto& l : limbs) l.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    u64 x = poly[j];
    for (int l = 0; l < kLimbs; ++l) {
      std::int64_t d = sext16(x);
      limbs[l][j] = d;
      x = (x - static_cast<u64>(d)) >> kLimbBits;
    }
  }
}

}  // namespace

TorusSpectrum torus_spectrum(std::span<const u64> poly) {
  const auto& fft = NegacyclicFft::get(poly.size());
  std::vector<std::int64_t> limbs[kLimbs];
  split_limbs(poly, limbs);
  TorusSpectrum s;
  for (int l = 0; l < kLimbs; ++l) {
    s.limb[l].resize(fft.spectrum_size());
    fft.forward(limbs[l], s.limb[l]);
  }
  return s;
}

void fold_limbs(const NegacyclicFft& fft, std::span<const std::vector<cplx>> acc, std::span<u64> out,
                std::vector<double>& scratch) {
  scratch.resize(fft.size());
  for (int l = 0; l < kLimbs; ++l) {
    fft.inverse(acc[l], scratch);
    for (std::size_t j = 0; j < fft.size(); ++j) {
      auto v = round_exact(scratch[j]);
      out[j] += static_cast<u64>(v) << (kLimbBits * l);
    }
  }
}

void negacyclic_mul_add(std::span<const std::int64_t> small, const TorusSpectrum& torus,
                        std::span<u64> out) {
  const auto& fft = NegacyclicFft::get(small.size());
  std::size_t m = fft.spectrum_size();
  std::vector<cplx> fs(m);
  fft.forward(small, fs);
  std::vector<cplx> acc[kLimbs];
  for (int l = 0; l < kLimbs; ++l) {
    acc[l].resize(m);
    for (std::size_t j = 0; j < m; ++j) acc[l][j] = fs[j] * torus.limb[l][j];
  }
  std::vector<double> scratch;
  fold_limbs(fft, acc, out, scratch);
}

void negacyclic_mul_schoolbook(std::span<const std::int64_t> small, std::span<const u64> torus,
                               std::span<u64> out) {
  std::size_t n = small.size();
  for (std::size_t k = 0; k < n; ++k) out[k] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    u64 s = static_cast<u64>(small[i]);
    if (s == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      u64 prod = s * torus[j];
      std::size_t k = i + j;
      if (k < n)
        out[k] += prod;
      else
        out[k - n] -= prod;
    }
  }
}

void rotate(std::span<const u64> in, std::size_t k, std::span<u64> out) {
  std::size_t n = in.size();
  k %= 2 * n;
  bool flip = k >= n;
  if (flip) k -= n;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t t = j + k;
    u64 v = in[j];
    bool neg = flip;
    if (t >= n) {
      t -= n;
      neg = !neg;
    }
    out[t] = neg ? (u64{0} - v) : v;
  }
}

}  // namespace pql3::fhe
