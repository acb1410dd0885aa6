#pragma once

#include <string>
#include <vector>

#include "pql3/common/bytes.hpp"
#include "pql3/model/config.hpp"
#include "pql3/model/tensor.hpp"

namespace pql3::model {

struct LayerWeights {
  Vec rms_gain_attn;
  Matrix q_proj;  // (n_heads * d_head) x d_emb
  Matrix k_proj;  // (n_kv_groups * d_head) x d_emb
  Matrix v_proj;  // (n_kv_groups * d_head) x d_emb
  Matrix o_proj;  // d_emb x (n_heads * d_head)
  Vec rms_gain_ffn;
  Matrix gate_proj;  // d_ffn x d_emb
  Matrix up_proj;    // d_ffn x d_emb
  Matrix down_proj;  // d_emb x d_ffn
  bool operator==(const LayerWeights&) const = default;
};

struct Weights {
  ModelConfig config;
  Matrix token_embedding;  // vocab x d_emb
  std::vector<LayerWeights> layers;
  Vec final_rms_gain;
  Matrix lm_head;  // vocab x d_emb

  // Seeded Gaussian init scaled by 1/sqrt(fan_in). Every value is rounded to
  // float so the f32 weight file round-trips exactly.
  static Weights random(const ModelConfig& cfg);

  // File layout (little-endian): "PQL3", u32 version, config fields (see
  // weights.cpp), then f32 tensors row-major in this order: token_embedding;
  // per layer rms_gain_attn, q, k, v, o, rms_gain_ffn, gate, up, down;
  // final_rms_gain; lm_head.
  Bytes serialize() const;
  static Weights deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::string& path) const;
  static Weights load(const std::string& path);

  // Throws ShapeError when a tensor disagrees with the config.
  void check_shapes() const;
  bool operator==(const Weights&) const = default;
};

}  // namespace pql3::model
