#pragma once

#include <cstdint>
#include <vector>

#include "pql3/quant/quant.hpp"

namespace pql3::quant {

// Float values and their quantized codes side by side. For in-range values,
// |real[i] - dequantize(codes[i])| <= scale / 2.
struct DualTensor {
  std::vector<std::size_t> shape;
  std::vector<double> real;
  std::vector<std::int64_t> codes;
  QuantParams qparams;

  std::size_t size() const { return codes.size(); }

  static DualTensor from_real(std::vector<std::size_t> shape, std::vector<double> values, const QuantParams& q);
  // Real view is the dequantized codes.
  static DualTensor from_codes(std::vector<std::size_t> shape, std::vector<std::int64_t> codes, const QuantParams& q);

  std::vector<double> dequantized() const { return dequantize(codes, qparams); }
};

}  // namespace pql3::quant
