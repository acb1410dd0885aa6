#include "pql3/attn/head_math.hpp"

#include <algorithm>
#include <cmath>

#include "pql3/model/layers.hpp"
#include "pql3/quant/quant.hpp"

namespace pql3::attn {

HeadMath::HeadMath(const model::Weights& w, int layer)
    : cfg_(w.config), lw_(w.layers.at(static_cast<std::size_t>(layer))) {}

model::Vec HeadMath::query(int head, std::size_t pos, std::span<const double> h) const {
  auto dh = static_cast<std::size_t>(d_head());
  auto q = model::matvec_rows(lw_.q_proj, static_cast<std::size_t>(head) * dh, dh, h);
  return model::rope(q, pos, cfg_.rope_base);
}

model::Vec HeadMath::key(int group, std::size_t pos, std::span<const double> h) const {
  auto dh = static_cast<std::size_t>(d_head());
  auto k = model::matvec_rows(lw_.k_proj, static_cast<std::size_t>(group) * dh, dh, h);
  return model::rope(k, pos, cfg_.rope_base);
}

model::Vec HeadMath::value(int group, std::span<const double> h) const {
  auto dh = static_cast<std::size_t>(d_head());
  return model::matvec_rows(lw_.v_proj, static_cast<std::size_t>(group) * dh, dh, h);
}

double HeadMath::out_weight(int row, int head, int col) const {
  return lw_.o_proj.at(static_cast<std::size_t>(row), static_cast<std::size_t>(head * d_head() + col));
}

model::Matrix HeadMath::rotated(const model::Matrix& m, std::size_t row0, std::size_t pos) const {
  auto dh = static_cast<std::size_t>(d_head());
  model::Matrix out(dh, m.cols);
  // Rotating the output of a linear map rotates each column of its rows.
  std::vector<double> col(dh);
  for (std::size_t c = 0; c < m.cols; ++c) {
    for (std::size_t r = 0; r < dh; ++r) col[r] = m.at(row0 + r, c);
    auto rc = model::rope(col, pos, cfg_.rope_base);
    for (std::size_t r = 0; r < dh; ++r) out.at(r, c) = rc[r];
  }
  return out;
}

model::Matrix HeadMath::rotated_query_rows(int head, std::size_t pos) const {
  return rotated(lw_.q_proj, static_cast<std::size_t>(head * d_head()), pos);
}

model::Matrix HeadMath::rotated_key_rows(int group, std::size_t pos) const {
  return rotated(lw_.k_proj, static_cast<std::size_t>(group * d_head()), pos);
}

std::int64_t WeightQuantizer::code(double w) const {
  auto c = static_cast<std::int64_t>(quant::round_half_even(w / step()));
  return std::clamp(c, -levels(), levels());
}

double rotary_pair_scale(const model::Matrix& proj, const std::vector<int>& blocks, int d_head) {
  double s = 0;
  for (int b : blocks)
    for (int r = 0; r < d_head; r += 2)
      for (std::size_t c = 0; c < proj.cols; ++c) {
        double x = proj.at(static_cast<std::size_t>(b * d_head + r), c);
        double y = proj.at(static_cast<std::size_t>(b * d_head + r + 1), c);
        s = std::max(s, std::hypot(x, y));
      }
  return s;
}

double max_abs_rows(const model::Matrix& m, const std::vector<int>& blocks, int d_head) {
  double s = 0;
  for (int b : blocks)
    for (int r = 0; r < d_head; ++r)
      for (std::size_t c = 0; c < m.cols; ++c) s = std::max(s, std::abs(m.at(static_cast<std::size_t>(b * d_head + r), c)));
  return s;
}

double max_abs_cols(const model::Matrix& m, const std::vector<int>& blocks, int d_head) {
  double s = 0;
  for (int b : blocks)
    for (int c = 0; c < d_head; ++c)
      for (std::size_t r = 0; r < m.rows; ++r) s = std::max(s, std::abs(m.at(r, static_cast<std::size_t>(b * d_head + c))));
  return s;
}

}  // namespace pql3::attn
