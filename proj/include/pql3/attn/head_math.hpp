#pragma once

#include <vector>

#include "pql3/attn/config.hpp"
#include "pql3/model/weights.hpp"

namespace pql3::attn {

// Floating-point pieces of one layer's attention, computed exactly as the
// plain model does (same projections, same rotary step), so that the disable
// path and the reference values agree bit for bit.
class HeadMath {
 public:
  HeadMath(const model::Weights& w, int layer);

  model::Vec query(int head, std::size_t pos, std::span<const double> h) const;
  model::Vec key(int group, std::size_t pos, std::span<const double> h) const;
  model::Vec value(int group, std::span<const double> h) const;
  // Per-head slice of the output projection: d_emb rows by d_head columns.
  double out_weight(int row, int head, int col) const;

  // Rows of the query (key) projection for one head (group) after the
  // rotation of position `pos` is folded in: d_head x d_emb.
  model::Matrix rotated_query_rows(int head, std::size_t pos) const;
  model::Matrix rotated_key_rows(int group, std::size_t pos) const;

  const model::ModelConfig& config() const { return cfg_; }
  int d_head() const { return cfg_.d_head(); }
  const model::LayerWeights& layer() const { return lw_; }

 private:
  model::Matrix rotated(const model::Matrix& m, std::size_t row0, std::size_t pos) const;
  const model::ModelConfig& cfg_;
  const model::LayerWeights& lw_;
};

// Symmetric quantizer for clear weights: code = clamp(round(w / step)),
// step = scale / levels, levels = 2^(bits-1) - 1.
struct WeightQuantizer {
  double scale = 1.0;
  int bits = 2;
  std::int64_t levels() const { return (std::int64_t{1} << (bits - 1)) - 1; }
  double step() const { return scale / static_cast<double>(levels()); }
  std::int64_t code(double w) const;
  double dequantize(std::int64_t c) const { return static_cast<double>(c) * step(); }
};

// Largest norm of a rotary pair over the rows of the given heads' query
// (or groups' key) projection: bounds every entry of the rotated rows, for
// every position.
double rotary_pair_scale(const model::Matrix& proj, const std::vector<int>& blocks, int d_head);
double max_abs_rows(const model::Matrix& m, const std::vector<int>& blocks, int d_head);
double max_abs_cols(const model::Matrix& m, const std::vector<int>& blocks, int d_head);

}  // namespace pql3::attn
