#include "pql3/attn/compile.hpp"

#include <openssl/sha.h>

#include "pql3/attn/graph_builder.hpp"

namespace pql3::attn {

namespace {
std::string digest(std::span<const std::uint8_t> b) {
  unsigned char h[SHA256_DIGEST_LENGTH];
  SHA256(b.data(), b.size(), h);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (int i = 0; i < 8; ++i) {
    s += hex[h[i] >> 4];
    s += hex[h[i] & 15];
  }
  return s;
}
}  // namespace

std::string plan_key(const EncAttnConfig& cfg, const model::Weights& w, const CalibrationRecord& rec) {
  return cfg.key() + ";weights=" + digest(w.serialize()) + ";calibration=" + digest(rec.serialize());
}

std::shared_ptr<const circuit::ExecutionPlan> compile_attention(const EncAttnConfig& cfg, const model::Weights& w,
                                                                const CalibrationRecord& rec, std::uint32_t seq_len,
                                                                circuit::PlanCache* cache) {
  auto key = plan_key(cfg, w, rec);
  auto build = [&] { return build_graph(cfg, w, rec, seq_len); };
  if (cache) return cache->get(key, seq_len, cfg.crypto, build);
  return std::make_shared<const circuit::ExecutionPlan>(circuit::compile(build(), cfg.crypto, seq_len, key));
}

}  // namespace pql3::attn
