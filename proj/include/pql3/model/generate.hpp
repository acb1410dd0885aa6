#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pql3/model/model.hpp"

namespace pql3::model {

enum class SelectionRule { Argmax, SeededSample };

struct GenerationConfig {
  int max_new_tokens = 3;
  int top_k = 1;
  SelectionRule rule = SelectionRule::Argmax;
  std::uint64_t sample_seed = 0;
  void validate(int vocab_size) const;  // 1 <= top_k <= vocab, max_new_tokens >= 0
};

struct Selection {
  int token = 0;
  std::vector<int> candidates;  // indices of the k largest logits, ties to the lower index
};

// The candidate set is the k largest logits (ties broken by lower index). The
// argmax rule picks its first element; the sampling rule draws from the
// softmax restricted to the set.
Selection select_token(std::span<const double> logits, int top_k, SelectionRule rule, std::mt19937_64& rng);

// Byte-level tokenizer.
std::vector<int> encode_text(std::string_view s);
std::string decode_tokens(std::span<const int> tokens);

struct GenerationStep {
  Vec logits;
  Selection selection;
  double seconds = 0.0;  // wall time of the forward pass and selection
};

struct Generation {
  std::vector<int> tokens;  // prompt followed by generated tokens
  std::vector<GenerationStep> steps;
};

// Autoregressive generation with a KV cache. Stops early at max_seq_len.
Generation generate(const Model& m, std::span<const int> prompt, const GenerationConfig& cfg,
                    AttentionOverride* ov = nullptr);

// Same selection rule, but every step recomputes from scratch (no cache).
Generation generate_recompute(const Model& m, std::span<const int> prompt, const GenerationConfig& cfg);

}  // namespace pql3::model
