#include "pql3/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "pql3/common/error.hpp"

namespace pql3::model {

Vec rms_norm(std::span<const double> x, std::span<const double> gain, double eps) {
  if (x.empty() || gain.size() != x.size()) throw ShapeError("rms_norm needs a non-empty input and a matching gain");
  double ss = 0.0;
  for (double v : x) ss += v * v;
  double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + eps);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
  return out;
}

Vec rope(std::span<const double> x, std::size_t position, double base) {
  if (x.size() % 2 != 0) throw ShapeError("rotary encoding needs an even dimension");
  Vec out(x.begin(), x.end());
  auto d = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size() / 2; ++i) {
    double ang = static_cast<double>(position) * std::pow(base, -2.0 * static_cast<double>(i) / d);
    double c = std::cos(ang), s = std::sin(ang);
    double a = x[2 * i], b = x[2 * i + 1];
    out[2 * i] = a * c - b * s;
    out[2 * i + 1] = a * s + b * c;
  }
  return out;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

Vec softmax(std::span<const double> x) {
  if (x.empty()) return {};
  double mx = *std::max_element(x.begin(), x.end());
  Vec out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp(x[i] - mx);
  for (auto& v : out) v /= sum;
  return out;
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, bool causal, double scale) {
  if (q.cols != k.cols || k.rows != v.rows || q.rows > k.rows) throw ShapeError("attention shape mismatch");
  Matrix out(q.rows, v.cols);
  std::size_t offset = k.rows - q.rows;
  for (std::size_t i = 0; i < q.rows; ++i) {
    std::size_t visible = causal ? i + offset + 1 : k.rows;
    Vec s(visible);
    for (std::size_t j = 0; j < visible; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < q.cols; ++c) acc += q.at(i, c) * k.at(j, c);
      s[j] = acc * scale;
    }
    Vec p = softmax(s);
    for (std::size_t j = 0; j < visible; ++j)
      for (std::size_t c = 0; c < v.cols; ++c) out.at(i, c) += p[j] * v.at(j, c);
  }
  return out;
}

Vec swiglu(std::span<const double> x, const LayerWeights& w) {
  Vec g = matvec(w.gate_proj, x);
  Vec u = matvec(w.up_proj, x);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = silu(g[i]) * u[i];
  return matvec(w.down_proj, g);
}

}  // namespace pql3::model
