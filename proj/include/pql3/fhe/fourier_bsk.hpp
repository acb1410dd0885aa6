#pragma once

#include <vector>

#include "pql3/fhe/poly.hpp"

namespace pql3::fhe {

class ServerKey;

// Bootstrapping key in Fourier form, laid out [bit][row][column][limb][N/2].
struct FourierBsk {
  std::size_t rows = 0, half = 0;
  std::vector<cplx> data;

  const cplx* at(std::size_t bit, std::size_t row, int col, int limb) const {
    return data.data() + (((bit * rows + row) * 2 + col) * kLimbs + limb) * half;
  }

  static FourierBsk build(const ServerKey& key);
};

}  // namespace pql3::fhe
