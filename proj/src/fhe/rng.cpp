#include "pql3/fhe/rng.hpp"

#include <cmath>
#include <numbers>

namespace pql3::fhe {

double Rng::normal() {
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace pql3::fhe
