#pragma once

#include <map>
#include <string>
#include <vector>

#include "pql3/attn/config.hpp"
#include "pql3/model/weights.hpp"
#include "pql3/quant/quant.hpp"

namespace pql3::attn {

// Quantization parameters and clear constants for every target layer, keyed
// "L<layer>.<name>". Activation entries: x, q, k, v, score, exp, prob, ctx.
// Constant entries: wq, wk, wv, wo (weight scales) and shift (largest real
// score seen, subtracted before the exponential).
struct CalibrationRecord {
  std::map<std::string, quant::QuantParams> qparams;
  std::map<std::string, double> constants;

  // CompileError when the entry is missing.
  const quant::QuantParams& at(int layer, const std::string& name) const;
  double constant(int layer, const std::string& name) const;

  Bytes serialize() const;  // "PQCR", u32 version, entries in key order
  static CalibrationRecord deserialize(std::span<const std::uint8_t> bytes);
  bool operator==(const CalibrationRecord&) const = default;
};

std::string calib_key(int layer, const std::string& name);

// Runs the plain model over each token sequence and records, for the target
// layers and heads in scope, the range of every quantized activation.
// CalibrationError on an empty batch.
CalibrationRecord calibrate_block(const std::vector<std::vector<int>>& sequences, const model::Weights& w,
                                  const EncAttnConfig& cfg);

}  // namespace pql3::attn
