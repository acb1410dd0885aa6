#include "pql3/quant/quant.hpp"

#include <algorithm>
#include <cmath>

#include "pql3/common/error.hpp"
#include "pql3/quant/dual_tensor.hpp"

namespace pql3::quant {

double round_half_even(double x) { return std::nearbyint(x); }

std::int64_t QuantParams::quantize(double x) const {
  double r = round_half_even(x / scale);
  double code = r + static_cast<double>(zero_point);
  if (!(code >= 0)) return 0;  // also maps NaN to the bottom code
  if (code >= static_cast<double>(max_code())) return max_code();
  return static_cast<std::int64_t>(code);
}

double QuantParams::dequantize(std::int64_t code) const {
  if (code < 0 || code > max_code())
    throw RangeError("code " + std::to_string(code) + " outside [0, " + std::to_string(max_code()) + "]");
  return dequantize_affine(code);
}

void QuantParams::serialize(ByteWriter& w) const {
  w.u8(static_cast<std::uint8_t>(n_bits));
  w.f64(scale);
  w.i64(zero_point);
  w.f64(observed_min);
  w.f64(observed_max);
  w.u8(degenerate ? 1 : 0);
}

QuantParams QuantParams::deserialize(ByteReader& in) {
  QuantParams q;
  q.n_bits = in.u8();
  q.scale = in.f64();
  q.zero_point = in.i64();
  q.observed_min = in.f64();
  q.observed_max = in.f64();
  q.degenerate = in.u8() != 0;
  if (q.n_bits < 1 || q.n_bits > 16 || !(q.scale > 0)) throw IoError("corrupt quantization parameters");
  return q;
}

QuantParams params_from_range(double lo, double hi, int n_bits) {
  if (n_bits < 1 || n_bits > 16) throw RangeError("n_bits must be in [1, 16]");
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw CalibrationError("invalid calibration range");
  QuantParams q;
  q.n_bits = n_bits;
  q.observed_min = lo;
  q.observed_max = hi;
  if (hi == lo) {
    q.degenerate = true;
    q.scale = 1.0;
    q.zero_point = 0;
    return q;
  }
  q.scale = (hi - lo) / static_cast<double>(q.max_code());
  auto zp = static_cast<std::int64_t>(round_half_even(-lo / q.scale));
  q.zero_point = std::clamp<std::int64_t>(zp, 0, q.max_code());
  return q;
}

void Calibrator::observe(double x) {
  if (!std::isfinite(x)) throw CalibrationError("non-finite calibration sample");
  lo_ = std::min(lo_, x);
  hi_ = std::max(hi_, x);
  ++count_;
}

void Calibrator::observe(std::span<const double> xs) {
  for (double x : xs) observe(x);
}

void Calibrator::merge(const Calibrator& other) {
  lo_ = std::min(lo_, other.lo_);
  hi_ = std::max(hi_, other.hi_);
  count_ += other.count_;
}

QuantParams Calibrator::finish(int n_bits, bool include_zero) const {
  if (empty()) throw CalibrationError("no calibration samples");
  double lo = lo_, hi = hi_;
  if (include_zero) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  return params_from_range(lo, hi, n_bits);
}

QuantParams calibrate(std::span<const double> samples, int n_bits) {
  Calibrator c;
  c.observe(samples);
  return c.finish(n_bits);
}

std::vector<std::int64_t> quantize(std::span<const double> x, const QuantParams& q) {
  std::vector<std::int64_t> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return q.quantize(v); });
  return out;
}

std::vector<double> dequantize(std::span<const std::int64_t> v, const QuantParams& q) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [&](std::int64_t c) { return q.dequantize(c); });
  return out;
}

fhe::LookupTable build_lut(const std::function<double(double)>& f, const QuantParams& in, const QuantParams& out,
                           int space_bits) {
  if (space_bits < in.n_bits) throw ShapeError("table space narrower than the input quantizer");
  std::size_t n = std::size_t{1} << space_bits;
  std::vector<fhe::u64> entries(n);
  for (std::size_t v = 0; v < n; ++v) {
    double y = f(in.dequantize_affine(static_cast<std::int64_t>(v)));
    if (!std::isfinite(y)) throw TableError("table function is not finite at code " + std::to_string(v));
    entries[v] = static_cast<fhe::u64>(out.quantize(y));
  }
  return fhe::LookupTable(std::move(entries), space_bits);
}

DualTensor DualTensor::from_real(std::vector<std::size_t> shape, std::vector<double> values, const QuantParams& q) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != values.size()) throw ShapeError("shape does not match value count");
  DualTensor t;
  t.shape = std::move(shape);
  t.codes = quantize(values, q);
  t.real = std::move(values);
  t.qparams = q;
  return t;
}

DualTensor DualTensor::from_codes(std::vector<std::size_t> shape, std::vector<std::int64_t> codes,
                                  const QuantParams& q) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  if (n != codes.size()) throw ShapeError("shape does not match code count");
  DualTensor t;
  t.shape = std::move(shape);
  t.real = dequantize(codes, q);
  t.codes = std::move(codes);
  t.qparams = q;
  return t;
}

}  // namespace pql3::quant
