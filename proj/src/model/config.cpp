#include "pql3/model/config.hpp"

#include <cmath>
#include <string>

#include "pql3/common/error.hpp"

namespace pql3::model {

double ModelConfig::attention_scale() const {
  return 1.0 / std::sqrt(static_cast<double>(scale_by_head_dim ? d_head() : d_emb));
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("model config: " + what);
  };
  need(vocab_size >= 2, "vocab_size must be at least 2");
  need(d_emb > 0 && n_layers > 0 && n_heads > 0 && n_kv_groups > 0 && d_ffn > 0, "dimensions must be positive");
  need(d_emb % n_heads == 0, "d_emb must be divisible by n_heads");
  need(n_heads % n_kv_groups == 0, "n_heads must be divisible by n_kv_groups");
  need(d_head() % 2 == 0, "d_head must be even for rotary encoding");
  need(max_seq_len > 0, "max_seq_len must be positive");
  need(rope_base > 1.0, "rope_base must exceed 1");
  need(rms_eps > 0, "rms_eps must be positive");
}

}  // namespace pql3::model
