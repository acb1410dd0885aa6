#pragma once

#include <span>

#include "pql3/model/tensor.hpp"
#include "pql3/model/weights.hpp"

namespace pql3::model {

Vec rms_norm(std::span<const double> x, std::span<const double> gain, double eps = 1e-5);

// Rotates pairs (2i, 2i+1) by position * base^(-2i/d). Odd d throws ShapeError.
Vec rope(std::span<const double> x, std::size_t position, double base);

double silu(double x);
Vec softmax(std::span<const double> x);

// softmax(Q K^T * scale) V. Rows of q are the last q.rows positions of the
// key sequence; with causal masking query i sees keys j <= i + (k.rows - q.rows).
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, bool causal, double scale);

// down(silu(gate x) * up x)
Vec swiglu(std::span<const double> x, const LayerWeights& w);

}  // namespace pql3::model
