#include "pql3/attn/calibration.hpp"

#include <cmath>
#include <limits>

#include "pql3/attn/head_math.hpp"
#include "pql3/common/error.hpp"
#include "pql3/model/layers.hpp"
#include "pql3/model/model.hpp"

namespace pql3::attn {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'C', 'R'};
constexpr std::uint32_t kVersion = 1;

// Observes the target layers without replacing any head.
class Observer final : public model::AttentionOverride {
 public:
  Observer(const model::Weights& w, const EncAttnConfig& cfg) : w_(w), cfg_(cfg), heads_(cfg.heads(w.config)) {
    for (int l : cfg.target_layers) layers_.emplace(l, LayerState(HeadMath(w, l)));
  }

  const std::vector<int>& replaced_heads(int) const override { return none_; }

  void attend(int layer, std::size_t pos, std::span<const double> h, std::span<double>) override {
    auto it = layers_.find(layer);
    if (it == layers_.end()) return;
    auto& s = it->second;
    if (pos == 0) {
      s.keys.clear();
      s.values.clear();
    }
    s.x.observe(h);
    const auto& mc = w_.config;
    std::map<int, std::pair<model::Vec, model::Vec>> kv;
    for (int head : heads_) {
      int g = grouped_kv_map(head, mc);
      if (!kv.count(g)) kv[g] = {s.math.key(g, pos, h), s.math.value(g, h)};
    }
    s.keys.push_back({});
    s.values.push_back({});
    for (auto& [g, p] : kv) {
      s.k.observe(p.first);
      s.v.observe(p.second);
      s.keys.back()[g] = p.first;
      s.values.back()[g] = p.second;
    }
    for (int head : heads_) {
      int g = grouped_kv_map(head, mc);
      auto q = s.math.query(head, pos, h);
      s.q.observe(q);
      model::Vec scores(pos + 1);
      for (std::size_t j = 0; j <= pos; ++j) {
        double acc = 0;
        const auto& k = s.keys[j].at(g);
        for (std::size_t i = 0; i < q.size(); ++i) acc += q[i] * k[i];
        scores[j] = acc * mc.attention_scale();
        s.max_score = std::max(s.max_score, scores[j]);
      }
      s.score.observe(scores);
      auto p = model::softmax(scores);
      model::Vec ctx(q.size(), 0.0);
      for (std::size_t j = 0; j <= pos; ++j)
        for (std::size_t i = 0; i < ctx.size(); ++i) ctx[i] += p[j] * s.values[j].at(g)[i];
      s.ctx.observe(ctx);
    }
  }

  struct LayerState {
    explicit LayerState(HeadMath m) : math(std::move(m)) {}
    HeadMath math;
    quant::Calibrator x, q, k, v, score, ctx;
    std::vector<std::map<int, model::Vec>> keys, values;
    double max_score = -std::numeric_limits<double>::infinity();
  };
  std::map<int, LayerState> layers_;

 private:
  const model::Weights& w_;
  const EncAttnConfig& cfg_;
  std::vector<int> heads_;
  std::vector<int> none_;
};

}  // namespace

std::string calib_key(int layer, const std::string& name) { return "L" + std::to_string(layer) + "." + name; }

const quant::QuantParams& CalibrationRecord::at(int layer, const std::string& name) const {
  auto it = qparams.find(calib_key(layer, name));
  if (it == qparams.end()) throw CompileError("calibration record has no entry " + calib_key(layer, name));
  return it->second;
}

double CalibrationRecord::constant(int layer, const std::string& name) const {
  auto it = constants.find(calib_key(layer, name));
  if (it == constants.end()) throw CompileError("calibration record has no constant " + calib_key(layer, name));
  return it->second;
}

Bytes CalibrationRecord::serialize() const {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(qparams.size()));
  for (const auto& [k, q] : qparams) {
    w.str(k);
    q.serialize(w);
  }
  w.u32(static_cast<std::uint32_t>(constants.size()));
  for (const auto& [k, v] : constants) {
    w.str(k);
    w.f64(v);
  }
  return w.take();
}

CalibrationRecord CalibrationRecord::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  auto magic = in.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw IoError("not a calibration record");
  if (in.u32() != kVersion) throw IoError("unsupported calibration record version");
  CalibrationRecord r;
  for (std::uint32_t n = in.u32(), i = 0; i < n; ++i) {
    auto k = in.str();
    r.qparams.emplace(k, quant::QuantParams::deserialize(in));
  }
  for (std::uint32_t n = in.u32(), i = 0; i < n; ++i) {
    auto k = in.str();
    r.constants.emplace(k, in.f64());
  }
  in.expect_end();
  return r;
}

CalibrationRecord calibrate_block(const std::vector<std::vector<int>>& sequences, const model::Weights& w,
                                  const EncAttnConfig& cfg) {
  cfg.validate(w.config);
  std::size_t total = 0;
  for (const auto& s : sequences) total += s.size();
  if (total == 0) throw CalibrationError("calibration needs at least one non-empty token sequence");

  model::Model plain(std::make_shared<const model::Weights>(w));
  Observer obs(w, cfg);
  for (const auto& s : sequences) {
    if (s.empty()) continue;
    model::KvCache cache(w.config.n_layers);
    plain.forward_step(s, cache, &obs);
  }

  CalibrationRecord r;
  const auto& mc = w.config;
  auto heads = cfg.heads(mc);
  std::vector<int> groups;
  for (int h : heads)
    if (groups.empty() || groups.back() != grouped_kv_map(h, mc)) groups.push_back(grouped_kv_map(h, mc));
  auto unit = quant::params_from_range(0.0, 1.0, cfg.n_bits);
  for (auto& [l, s] : obs.layers_) {
    // Centred activations keep zero exactly representable, so that the
    // integer products and sums need no zero-point correction terms.
    r.qparams[calib_key(l, "x")] = s.x.finish(cfg.n_bits, true);
    r.qparams[calib_key(l, "q")] = s.q.finish(cfg.n_bits, true);
    r.qparams[calib_key(l, "k")] = s.k.finish(cfg.n_bits, true);
    r.qparams[calib_key(l, "v")] = s.v.finish(cfg.n_bits, true);
    r.qparams[calib_key(l, "score")] = s.score.finish(cfg.n_bits);
    r.qparams[calib_key(l, "ctx")] = s.ctx.finish(cfg.n_bits, true);
    r.qparams[calib_key(l, "exp")] = unit;
    r.qparams[calib_key(l, "prob")] = unit;
    const auto& lw = w.layers[static_cast<std::size_t>(l)];
    r.constants[calib_key(l, "wq")] = rotary_pair_scale(lw.q_proj, heads, mc.d_head());
    r.constants[calib_key(l, "wk")] = rotary_pair_scale(lw.k_proj, groups, mc.d_head());
    r.constants[calib_key(l, "wv")] = max_abs_rows(lw.v_proj, groups, mc.d_head());
    r.constants[calib_key(l, "wo")] = max_abs_cols(lw.o_proj, heads, mc.d_head());
    r.constants[calib_key(l, "shift")] = s.max_score;
  }
  return r;
}

}  // namespace pql3::attn
