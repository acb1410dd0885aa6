#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pql3::model {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool operator==(const Matrix&) const = default;
};

Vec matvec(const Matrix& m, std::span<const double> x);
// Rows [row0, row0 + n) of m times x.
Vec matvec_rows(const Matrix& m, std::size_t row0, std::size_t n, std::span<const double> x);

}  // namespace pql3::model
