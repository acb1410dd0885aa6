#include "pql3/fhe/pbs.hpp"

namespace pql3::fhe {

ReferencePbs::ReferencePbs(const ClientKey& key, u64 seed) : key_(key) { key_.rng_ = Rng(seed); }

LweCiphertext ReferencePbs::bootstrap(const LweCiphertext& c, const LookupTable& g) const {
  std::lock_guard lock(mu_);
  u64 m = key_.decrypt_unchecked(c);
  return key_.encrypt(g(m), key_.params().total_bits());
}

}  // namespace pql3::fhe
