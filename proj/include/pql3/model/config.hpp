#pragma once

#include <cstdint>

namespace pql3::model {

struct ModelConfig {
  int vocab_size = 256;  // byte-level
  int d_emb = 8;
  int n_layers = 2;
  int n_heads = 4;
  int n_kv_groups = 2;
  int d_ffn = 16;
  int max_seq_len = 64;
  double rope_base = 10000.0;
  std::uint64_t weight_seed = 1;
  // Attention logits are divided by sqrt(d_emb) unless this is set, in which
  // case the per-head convention sqrt(d_head) is used.
  bool scale_by_head_dim = false;
  double rms_eps = 1e-5;

  int d_head() const { return d_emb / n_heads; }
  int heads_per_group() const { return n_heads / n_kv_groups; }
  double attention_scale() const;
  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

}  // namespace pql3::model
