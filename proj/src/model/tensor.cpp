#include "pql3/model/tensor.hpp"

#include "pql3/common/error.hpp"

namespace pql3::model {

Vec matvec_rows(const Matrix& m, std::size_t row0, std::size_t n, std::span<const double> x) {
  if (x.size() != m.cols || row0 + n > m.rows) throw ShapeError("matvec shape mismatch");
  Vec out(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* w = m.data.data() + (row0 + r) * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
  return out;
}

Vec matvec(const Matrix& m, std::span<const double> x) { return matvec_rows(m, 0, m.rows, x); }

}  // namespace pql3::model
