#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>

#include "pql3/fhe/keys.hpp"
#include "pql3/fhe/lut.hpp"
#include "pql3/fhe/lwe.hpp"

namespace pql3::fhe {

// Total bootstraps performed by every engine in the process.
std::uint64_t global_pbs_count();

class PbsEngine {
 public:
  virtual ~PbsEngine() = default;

  // Validates c against the table and the noise budget, bootstraps, and bumps
  // both tallies. The result carries E_pbs on the ledger.
  LweCiphertext run(const LweCiphertext& c, const LookupTable& g) const;

  std::uint64_t count() const { return count_.load(); }
  virtual const CryptoParams& params() const = 0;
  virtual ParamsPtr params_ptr() const = 0;
  virtual u64 key_id() const = 0;

 protected:
  virtual LweCiphertext bootstrap(const LweCiphertext& c, const LookupTable& g) const = 0;

 private:
  mutable std::atomic<std::uint64_t> count_{0};
};

// Blind rotation over the GLWE accumulator, sample extraction, key switch.
class BlindRotatePbs final : public PbsEngine {
 public:
  explicit BlindRotatePbs(ServerKey key) : key_(std::move(key)) {}
  const CryptoParams& params() const override { return key_.params(); }
  ParamsPtr params_ptr() const override { return key_.params_ptr(); }
  u64 key_id() const override { return key_.key_id(); }
  const ServerKey& key() const { return key_; }

 protected:
  LweCiphertext bootstrap(const LweCiphertext& c, const LookupTable& g) const override;

 private:
  ServerKey key_;
};

#ifdef PQL3_ENABLE_REFERENCE_PBS
// Key-escrow oracle: decrypt, apply the table, re-encrypt. Insecure by
// design; only for testing the blind-rotation backend.
class ReferencePbs final : public PbsEngine {
 public:
  ReferencePbs(const ClientKey& key, u64 seed);
  const CryptoParams& params() const override { return key_.params(); }
  ParamsPtr params_ptr() const override { return key_.params_ptr(); }
  u64 key_id() const override { return key_.key_id(); }

 protected:
  LweCiphertext bootstrap(const LweCiphertext& c, const LookupTable& g) const override;

 private:
  mutable std::mutex mu_;
  mutable ClientKey key_;
};
#endif

}  // namespace pql3::fhe
