#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace pql3::fhe {

using u64 = std::uint64_t;
using cplx = std::complex<double>;

// Negacyclic transform over Z[X]/(X^N + 1): a real polynomial of length N is
// folded into N/2 complex points (coefficient j paired with j + N/2), twisted by
// the 2N-th root of unity and sent through a cyclic FFT of size N/2. Spectra are
// kept in bit-reversed order; they are only ever combined pointwise, and
// inverse() expects that same order.
class NegacyclicFft {
 public:
  explicit NegacyclicFft(std::size_t n);

  // Shared per-size instance; construction is thread-safe.
  static const NegacyclicFft& get(std::size_t n);

  std::size_t size() const { return n_; }
  std::size_t spectrum_size() const { return m_; }

  void forward(std::span<const std::int64_t> in, std::span<cplx> out) const;
  void forward(std::span<const double> in, std::span<cplx> out) const;
  // out[j] is the real coefficient j (not rounded).
  void inverse(std::span<const cplx> in, std::span<double> out) const;

 private:
  void fft_forward(cplx* a) const;
  void fft_inverse(cplx* a) const;

  std::size_t n_, m_;
  std::vector<cplx> twist_;          // psi^j, j < m
  std::vector<cplx> itwist_;         // conj(psi^j) / m
  std::vector<cplx> roots_, iroots_;  // stage-major twiddles for the size-m FFT
};

// Torus polynomials are split into this many signed 16-bit limbs before
// entering the FFT, so every product stays exact in double precision.
inline constexpr int kLimbs = 4;
inline constexpr int kLimbBits = 16;

// Fourier form of a torus (u64) polynomial: one spectrum per limb.
struct TorusSpectrum {
  std::vector<cplx> limb[kLimbs];
};

TorusSpectrum torus_spectrum(std::span<const u64> poly);

// out += small * torus over Z_{2^64}[X]/(X^N+1), exact when |small| <= 2^16
// coefficientwise (the FFT error margin is ample for N <= 2^14).
void negacyclic_mul_add(std::span<const std::int64_t> small, const TorusSpectrum& torus,
                        std::span<u64> out);

// O(N^2) oracle.
void negacyclic_mul_schoolbook(std::span<const std::int64_t> small, std::span<const u64> torus,
                               std::span<u64> out);

// out = X^k * in, k in [0, 2N).
void rotate(std::span<const u64> in, std::size_t k, std::span<u64> out);

// Sums limb spectra products and folds the result back to u64 coefficients.
// acc[l] holds sum_r F(digit_r) * F(limb l of key_r).
void fold_limbs(const NegacyclicFft& fft, std::span<const std::vector<cplx>> acc, std::span<u64> out,
                std::vector<double>& scratch);

}  // namespace pql3::fhe
