#include "pql3/model/model.hpp"

#include <algorithm>

#include "pql3/common/error.hpp"

namespace pql3::model {

Model::Model(std::shared_ptr<const Weights> w) : w_(std::move(w)) {
  w_->config.validate();
  w_->check_shapes();
}

Vec Model::head_context(int layer, int head, const Vec& q, const KvCache& cache) const {
  const auto& c = config();
  auto dh = static_cast<std::size_t>(c.d_head());
  std::size_t g0 = static_cast<std::size_t>(head / c.heads_per_group()) * dh;
  const auto& keys = cache.keys(layer);
  const auto& vals = cache.values(layer);
  std::size_t q0 = static_cast<std::size_t>(head) * dh;
  Vec s(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    double acc = 0.0;
    for (std::size_t t = 0; t < dh; ++t) acc += q[q0 + t] * keys[j][g0 + t];
    s[j] = acc * c.attention_scale();
  }
  Vec p = softmax(s);
  Vec ctx(dh, 0.0);
  for (std::size_t j = 0; j < keys.size(); ++j)
    for (std::size_t t = 0; t < dh; ++t) ctx[t] += p[j] * vals[j][g0 + t];
  return ctx;
}

void Model::layer_step(int layer, std::size_t pos, Vec& x, KvCache& cache, AttentionOverride* ov) const {
  const auto& c = config();
  const auto& lw = w_->layers[static_cast<std::size_t>(layer)];
  auto dh = static_cast<std::size_t>(c.d_head());

  Vec h = rms_norm(x, lw.rms_gain_attn, c.rms_eps);
  Vec q = matvec(lw.q_proj, h);
  Vec k = matvec(lw.k_proj, h);
  Vec v = matvec(lw.v_proj, h);
  for (std::size_t o = 0; o < q.size(); o += dh) {
    Vec r = rope(std::span(q).subspan(o, dh), pos, c.rope_base);
    std::copy(r.begin(), r.end(), q.begin() + static_cast<std::ptrdiff_t>(o));
  }
  for (std::size_t o = 0; o < k.size(); o += dh) {
    Vec r = rope(std::span(k).subspan(o, dh), pos, c.rope_base);
    std::copy(r.begin(), r.end(), k.begin() + static_cast<std::ptrdiff_t>(o));
  }
  cache.append(layer, std::move(k), std::move(v));

  Vec out(static_cast<std::size_t>(c.d_emb), 0.0);
  static const std::vector<int> kNone;
  const auto& replaced = ov ? ov->replaced_heads(layer) : kNone;
  if (ov) ov->attend(layer, pos, h, out);
  for (int head = 0; head < c.n_heads; ++head) {
    if (std::find(replaced.begin(), replaced.end(), head) != replaced.end()) continue;
    Vec ctx = head_context(layer, head, q, cache);
    std::size_t c0 = static_cast<std::size_t>(head) * dh;
    for (std::size_t i = 0; i < out.size(); ++i)
      for (std::size_t t = 0; t < dh; ++t) out[i] += lw.o_proj.at(i, c0 + t) * ctx[t];
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += out[i];

  Vec h2 = rms_norm(x, lw.rms_gain_ffn, c.rms_eps);
  Vec f = swiglu(h2, lw);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += f[i];
}

Vec Model::logits(const Vec& x) const {
  Vec h = rms_norm(x, w_->final_rms_gain, config().rms_eps);
  return matvec(w_->lm_head, h);
}

Vec Model::forward_step(std::span<const int> tokens, KvCache& cache, AttentionOverride* ov) const {
  const auto& c = config();
  if (tokens.empty()) throw ShapeError("forward_step needs at least one token");
  if (tokens.size() > static_cast<std::size_t>(c.max_seq_len))
    throw CapacityError("sequence of " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                        std::to_string(c.max_seq_len));
  if (cache.length() >= tokens.size()) throw ShapeError("cache already covers every token");
  Vec x;
  for (std::size_t pos = cache.length(); pos < tokens.size(); ++pos) {
    int t = tokens[pos];
    if (t < 0 || t >= c.vocab_size) throw RangeError("token id out of vocabulary");
    auto row = w_->token_embedding.row(static_cast<std::size_t>(t));
    x.assign(row.begin(), row.end());
    for (int l = 0; l < c.n_layers; ++l) layer_step(l, pos, x, cache, ov);
  }
  return logits(x);
}

std::vector<Vec> Model::forward_sequence(std::span<const int> tokens, AttentionOverride* ov) const {
  KvCache cache(config().n_layers);
  std::vector<Vec> out;
  for (std::size_t t = 1; t <= tokens.size(); ++t) out.push_back(forward_step(tokens.first(t), cache, ov));
  return out;
}

Vec Model::forward_recompute(std::span<const int> tokens) const {
  const auto& c = config();
  if (tokens.empty()) throw ShapeError("forward needs at least one token");
  if (tokens.size() > static_cast<std::size_t>(c.max_seq_len)) throw CapacityError("sequence exceeds max_seq_len");
  std::size_t n = tokens.size();
  auto d = static_cast<std::size_t>(c.d_emb);
  auto dh = static_cast<std::size_t>(c.d_head());
  Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = w_->token_embedding.row(static_cast<std::size_t>(tokens[i]));
    std::copy(row.begin(), row.end(), x.row(i).begin());
  }
  for (const auto& lw : w_->layers) {
    std::vector<Vec> q(n), k(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vec h = rms_norm(x.row(i), lw.rms_gain_attn, c.rms_eps);
      q[i] = matvec(lw.q_proj, h);
      k[i] = matvec(lw.k_proj, h);
      v[i] = matvec(lw.v_proj, h);
    }
    Matrix out(n, d);
    for (int head = 0; head < c.n_heads; ++head) {
      std::size_t q0 = static_cast<std::size_t>(head) * dh;
      std::size_t g0 = static_cast<std::size_t>(head / c.heads_per_group()) * dh;
      Matrix qm(n, dh), km(n, dh), vm(n, dh);
      for (std::size_t i = 0; i < n; ++i) {
        Vec qr = rope(std::span(q[i]).subspan(q0, dh), i, c.rope_base);
        Vec kr = rope(std::span(k[i]).subspan(g0, dh), i, c.rope_base);
        std::copy(qr.begin(), qr.end(), qm.row(i).begin());
        std::copy(kr.begin(), kr.end(), km.row(i).begin());
        std::copy(v[i].begin() + static_cast<std::ptrdiff_t>(g0), v[i].begin() + static_cast<std::ptrdiff_t>(g0 + dh),
                  vm.row(i).begin());
      }
      Matrix ctx = attention(qm, km, vm, true, c.attention_scale());
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t t = 0; t < dh; ++t) out.at(i, r) += lw.o_proj.at(r, q0 + t) * ctx.at(i, t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < d; ++r) x.at(i, r) += out.at(i, r);
      Vec h2 = rms_norm(x.row(i), lw.rms_gain_ffn, c.rms_eps);
      Vec f = swiglu(h2, lw);
      for (std::size_t r = 0; r < d; ++r) x.at(i, r) += f[r];
    }
  }
  auto last = x.row(n - 1);
  return logits(Vec(last.begin(), last.end()));
}

}  // namespace pql3::model
