#pragma once

#include <memory>
#include <span>
#include <vector>

#include "pql3/model/layers.hpp"
#include "pql3/model/weights.hpp"

namespace pql3::model {

// Per-layer rotated keys and values for positions [0, length). Each entry holds
// n_kv_groups * d_head values. Appending never touches earlier positions.
class KvCache {
 public:
  explicit KvCache(int n_layers = 0) : keys_(n_layers), values_(n_layers) {}
  std::size_t length() const { return keys_.empty() ? 0 : keys_.back().size(); }
  const std::vector<Vec>& keys(int layer) const { return keys_[layer]; }
  const std::vector<Vec>& values(int layer) const { return values_[layer]; }
  void append(int layer, Vec k, Vec v) {
    keys_[layer].push_back(std::move(k));
    values_[layer].push_back(std::move(v));
  }
  void clear() {
    for (auto& l : keys_) l.clear();
    for (auto& l : values_) l.clear();
  }

 private:
  std::vector<std::vector<Vec>> keys_, values_;
};

// Lets a caller take over some attention heads of some layers. For every
// (layer, position), in position-major order, the model calls attend() with
// the normalised layer input; the override adds the output-projected
// contribution of its replaced heads into `out` (zero on entry). The model
// supplies the remaining heads through the plain path.
class AttentionOverride {
 public:
  virtual ~AttentionOverride() = default;
  virtual const std::vector<int>& replaced_heads(int layer) const = 0;
  virtual void attend(int layer, std::size_t pos, std::span<const double> x_normed, std::span<double> out) = 0;
};

class Model {
 public:
  explicit Model(std::shared_ptr<const Weights> w);

  const ModelConfig& config() const { return w_->config; }
  const Weights& weights() const { return *w_; }

  // Runs positions cache.length() .. tokens.size()-1 and returns the logits
  // that predict the next token. Requires at least one token; CapacityError
  // past max_seq_len.
  Vec forward_step(std::span<const int> tokens, KvCache& cache, AttentionOverride* ov = nullptr) const;

  // Logits at every position, through a fresh cache.
  std::vector<Vec> forward_sequence(std::span<const int> tokens, AttentionOverride* ov = nullptr) const;

  // Last-position logits computed without any cache: every layer recomputes
  // keys and values for the whole prefix with full attention matrices.
  Vec forward_recompute(std::span<const int> tokens) const;

 private:
  void layer_step(int layer, std::size_t pos, Vec& x, KvCache& cache, AttentionOverride* ov) const;
  Vec head_context(int layer, int head, const Vec& q, const KvCache& cache) const;
  Vec logits(const Vec& x) const;

  std::shared_ptr<const Weights> w_;
};

}  // namespace pql3::model
