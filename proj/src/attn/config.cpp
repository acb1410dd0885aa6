#include "pql3/attn/config.hpp"

#include <algorithm>
#include <sstream>

#include "pql3/common/error.hpp"

namespace pql3::attn {

const char* to_string(FheMode m) {
  switch (m) {
    case FheMode::Disable:
      return "disable";
    case FheMode::Simulate:
      return "simulate";
    case FheMode::Execute:
      return "execute";
  }
  return "?";
}

const char* to_string(HeadScope s) { return s == HeadScope::Single ? "single" : "all"; }

FheMode parse_mode(const std::string& s) {
  if (s == "disable") return FheMode::Disable;
  if (s == "simulate") return FheMode::Simulate;
  if (s == "execute") return FheMode::Execute;
  throw ConfigError("unknown mode '" + s + "' (disable, simulate, execute)");
}

HeadScope parse_scope(const std::string& s) {
  if (s == "single") return HeadScope::Single;
  if (s == "all") return HeadScope::All;
  throw ConfigError("unknown head scope '" + s + "' (single, all)");
}

void EncAttnConfig::validate(const model::ModelConfig& m) const {
  m.validate();
  for (int l : target_layers)
    if (l < 0 || l >= m.n_layers)
      throw ConfigError("target layer " + std::to_string(l) + " outside [0, " + std::to_string(m.n_layers) + ")");
  auto sorted = target_layers;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("duplicate target layer");
  if (n_bits < 1 || n_bits > 8) throw ConfigError("n_bits must be in [1, 8]");
  if (weight_bits < 2 || weight_bits > 8) throw ConfigError("weight_bits must be in [2, 8]");
  if (recip_numerator < 0) throw ConfigError("recip_numerator must be non-negative");
  if (crypto.plaintext_bits != n_bits)
    throw ConfigError("crypto plaintext_bits (" + std::to_string(crypto.plaintext_bits) + ") must equal n_bits (" +
                      std::to_string(n_bits) + ")");
}

std::vector<int> EncAttnConfig::heads(const model::ModelConfig& m) const {
  if (scope == HeadScope::Single) return {0};
  std::vector<int> h(static_cast<std::size_t>(m.n_heads));
  for (int i = 0; i < m.n_heads; ++i) h[static_cast<std::size_t>(i)] = i;
  return h;
}

bool EncAttnConfig::targets(int layer) const {
  return std::find(target_layers.begin(), target_layers.end(), layer) != target_layers.end();
}

std::string EncAttnConfig::key() const {
  std::ostringstream os;
  os << "layers=";
  auto sorted = target_layers;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) os << (i ? "," : "") << sorted[i];
  os << ";scope=" << to_string(scope) << ";n_bits=" << n_bits << ";weight_bits=" << weight_bits
     << ";recip=" << recip() << ";crypto=";
  auto fp = crypto.fingerprint();
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 8; ++i) os << hex[fp[i] >> 4] << hex[fp[i] & 15];
  return os.str();
}

int grouped_kv_map(int head, const model::ModelConfig& m) {
  if (head < 0 || head >= m.n_heads) throw ConfigError("head index out of range");
  return head / m.heads_per_group();
}

}  // namespace pql3::attn
