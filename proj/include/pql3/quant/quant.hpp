#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "pql3/common/bytes.hpp"
#include "pql3/fhe/lut.hpp"

namespace pql3::quant {

// Affine per-tensor quantizer: code = clamp(round(x / scale) + zero_point, 0, 2^n_bits - 1).
// Rounding is to nearest, ties to even.
struct QuantParams {
  int n_bits = 2;
  double scale = 1.0;
  std::int64_t zero_point = 0;
  double observed_min = 0.0;
  double observed_max = 0.0;
  bool degenerate = false;  // all samples equal; scale forced to 1, zero point to 0

  std::int64_t max_code() const { return (std::int64_t{1} << n_bits) - 1; }
  std::int64_t quantize(double x) const;
  // Throws RangeError for codes outside [0, max_code].
  double dequantize(std::int64_t code) const;
  // (code - zero_point) * scale with no range check; used for widened tables.
  double dequantize_affine(std::int64_t code) const { return static_cast<double>(code - zero_point) * scale; }

  void serialize(ByteWriter& w) const;
  static QuantParams deserialize(ByteReader& in);
  bool operator==(const QuantParams&) const = default;
};

// Builds the quantizer for the range [lo, hi].
QuantParams params_from_range(double lo, double hi, int n_bits);

double round_half_even(double x);

// Streaming min/max reduction. Order-invariant, and partial calibrators over
// disjoint streams merge into the same result.
class Calibrator {
 public:
  void observe(double x);
  void observe(std::span<const double> xs);
  void merge(const Calibrator& other);
  bool empty() const { return count_ == 0; }
  std::uint64_t count() const { return count_; }
  double min() const { return lo_; }
  double max() const { return hi_; }
  // Throws CalibrationError when nothing was observed. With include_zero the
  // range is widened to contain 0 so that zero is exactly representable up to
  // half a step.
  QuantParams finish(int n_bits, bool include_zero = false) const;

 private:
  double lo_ = std::numeric_limits<double>::infinity();
  double hi_ = -std::numeric_limits<double>::infinity();
  std::uint64_t count_ = 0;
};

QuantParams calibrate(std::span<const double> samples, int n_bits);

std::vector<std::int64_t> quantize(std::span<const double> x, const QuantParams& q);
std::vector<double> dequantize(std::span<const std::int64_t> v, const QuantParams& q);

// entries[v] = out.quantize(f(in.dequantize(v))) for v < 2^space_bits. Codes
// above in.max_code() (a widened input space) continue the affine map.
// A non-finite f value throws TableError.
fhe::LookupTable build_lut(const std::function<double(double)>& f, const QuantParams& in, const QuantParams& out,
                           int space_bits);

}  // namespace pql3::quant
