#pragma once

#include <string>
#include <vector>

#include "pql3/fhe/params.hpp"
#include "pql3/model/config.hpp"

namespace pql3::attn {

// disable: plain floating-point model, no quantization.
// simulate: the compiled integer circuit evaluated in the clear.
// execute: the same circuit evaluated homomorphically.
enum class FheMode { Disable, Simulate, Execute };
enum class HeadScope { Single, All };

const char* to_string(FheMode m);
const char* to_string(HeadScope s);
FheMode parse_mode(const std::string& s);    // ConfigError on unknown names
HeadScope parse_scope(const std::string& s);

struct EncAttnConfig {
  std::vector<int> target_layers{0};
  HeadScope scope = HeadScope::Single;
  FheMode mode = FheMode::Simulate;
  int n_bits = 2;       // activation codes
  int weight_bits = 2;  // symmetric clear weights: codes in [-(2^(b-1)-1), 2^(b-1)-1]
  // Numerator of the reciprocal table; 0 picks 4 * (2^n_bits - 1).
  int recip_numerator = 0;
  fhe::CryptoParams crypto = fhe::CryptoParams::micro(2, 5, 1);

  // Throws ConfigError.
  void validate(const model::ModelConfig& m) const;
  std::vector<int> heads(const model::ModelConfig& m) const;
  bool targets(int layer) const;
  int recip() const { return recip_numerator > 0 ? recip_numerator : 4 * ((1 << n_bits) - 1); }
  // Everything the compiled circuit depends on except seq_len and the weights.
  std::string key() const;
};

// Query head -> key/value group under grouped-query attention.
int grouped_kv_map(int head, const model::ModelConfig& m);

}  // namespace pql3::attn
