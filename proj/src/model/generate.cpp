#include "pql3/model/generate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "pql3/common/error.hpp"

namespace pql3::model {

void GenerationConfig::validate(int vocab_size) const {
  if (top_k < 1 || top_k > vocab_size) throw ConfigError("top_k must lie in [1, vocab_size]");
  if (max_new_tokens < 0) throw ConfigError("max_new_tokens must be non-negative");
}

Selection select_token(std::span<const double> logits, int top_k, SelectionRule rule, std::mt19937_64& rng) {
  if (top_k < 1 || static_cast<std::size_t>(top_k) > logits.size()) throw ConfigError("top_k out of range");
  std::vector<int> idx(logits.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); };
  std::partial_sort(idx.begin(), idx.begin() + top_k, idx.end(), better);
  idx.resize(static_cast<std::size_t>(top_k));
  Selection s;
  s.candidates = idx;
  if (rule == SelectionRule::Argmax) {
    s.token = idx.front();
    return s;
  }
  double mx = logits[idx.front()];
  std::vector<double> w(idx.size());
  double total = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) total += w[i] = std::exp(logits[idx[i]] - mx);
  double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  s.token = idx.back();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (u < w[i]) {
      s.token = idx[i];
      break;
    }
    u -= w[i];
  }
  return s;
}

std::vector<int> encode_text(std::string_view s) {
  std::vector<int> out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(c);
  return out;
}

std::string decode_tokens(std::span<const int> tokens) {
  std::string s;
  for (int t : tokens) s.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  return s;
}

namespace {

template <typename Step>
Generation run(const Model& m, std::span<const int> prompt, const GenerationConfig& cfg, Step&& step) {
  cfg.validate(m.config().vocab_size);
  if (prompt.empty()) throw ShapeError("prompt must contain at least one token");
  Generation g;
  g.tokens.assign(prompt.begin(), prompt.end());
  std::mt19937_64 rng(cfg.sample_seed);
  auto limit = static_cast<std::size_t>(m.config().max_seq_len);
  for (int s = 0; s < cfg.max_new_tokens && g.tokens.size() < limit; ++s) {
    GenerationStep st;
    auto t0 = std::chrono::steady_clock::now();
    st.logits = step(g.tokens);
    st.selection = select_token(st.logits, cfg.top_k, cfg.rule, rng);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.tokens.push_back(st.selection.token);
    g.steps.push_back(std::move(st));
  }
  return g;
}

}  // namespace

Generation generate(const Model& m, std::span<const int> prompt, const GenerationConfig& cfg, AttentionOverride* ov) {
  KvCache cache(m.config().n_layers);
  return run(m, prompt, cfg, [&](const std::vector<int>& t) { return m.forward_step(t, cache, ov); });
}

Generation generate_recompute(const Model& m, std::span<const int> prompt, const GenerationConfig& cfg) {
  return run(m, prompt, cfg, [&](const std::vector<int>& t) { return m.forward_recompute(t); });
}

}  // namespace pql3::model
