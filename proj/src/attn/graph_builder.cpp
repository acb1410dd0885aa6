#include "pql3/attn/graph_builder.hpp"

#include <algorithm>
#include <cmath>

#include "pql3/attn/head_math.hpp"
#include "pql3/common/error.hpp"

namespace pql3::attn {

using circuit::Graph;
using circuit::NodeId;
using circuit::Role;
using circuit::Tag;

namespace {

struct LayerCircuit {
  LayerCircuit(int l, HeadMath m) : layer(l), math(std::move(m)) {}
  int layer;
  HeadMath math;
  std::map<std::string, std::int32_t> qp;  // graph qparams index per entry
  quant::QuantParams x, q, k, v, score, exp, prob, ctx;
  WeightQuantizer wq, wk, wv, wo;
  double shift = 0;
  // [head][pos][coord] node ids of the requantized keys and values
  std::map<int, std::vector<std::vector<NodeId>>> keys, values;
};

WeightQuantizer weight_quantizer(double scale, int bits) {
  return WeightQuantizer{scale > 0 ? scale : 1.0, bits};
}

class Builder {
 public:
  Builder(const EncAttnConfig& cfg, const model::Weights& w, const CalibrationRecord& rec)
      : cfg_(cfg), mc_(w.config), heads_(cfg.heads(w.config)) {
    for (int l : cfg.target_layers) {
      LayerCircuit lc(l, HeadMath(w, l));
      const char* names[] = {"x", "q", "k", "v", "score", "exp", "prob", "ctx"};
      quant::QuantParams* slots[] = {&lc.x, &lc.q, &lc.k, &lc.v, &lc.score, &lc.exp, &lc.prob, &lc.ctx};
      for (int i = 0; i < 8; ++i) {
        *slots[i] = rec.at(l, names[i]);
        lc.qp[names[i]] = g_.add_qparams(*slots[i]);
      }
      lc.wq = weight_quantizer(rec.constant(l, "wq"), cfg.weight_bits);
      lc.wk = weight_quantizer(rec.constant(l, "wk"), cfg.weight_bits);
      lc.wv = weight_quantizer(rec.constant(l, "wv"), cfg.weight_bits);
      lc.wo = weight_quantizer(rec.constant(l, "wo"), cfg.weight_bits);
      lc.shift = rec.constant(l, "shift");
      layers_.push_back(std::move(lc));
    }
  }

  Graph build(std::uint32_t seq_len) {
    for (std::uint32_t pos = 0; pos < seq_len; ++pos)
      for (auto& lc : layers_) segment(lc, pos);
    return std::move(g_);
  }

 private:
  Tag tag(Role role, int layer, int head, std::uint32_t pos, int index = -1, int index2 = -1) const {
    return Tag{role, static_cast<std::int16_t>(layer), static_cast<std::int16_t>(head), static_cast<std::int32_t>(pos),
               index, index2};
  }

  // Linear projection of `in` (real values value * in_scale) by clear real
  // rows, followed by a requantizing table into `out`.
  std::vector<NodeId> project(const std::vector<NodeId>& in, const model::Matrix& rows, const WeightQuantizer& wq,
                              double in_scale, std::int64_t in_zero, const quant::QuantParams& out,
                              std::int32_t out_qp, Role pre_role, Role role, int layer, int head,
                              std::uint32_t pos) {
    std::vector<NodeId> res;
    for (std::size_t r = 0; r < rows.rows; ++r) {
      std::vector<std::int64_t> w(rows.cols);
      std::vector<double> err(rows.cols);
      std::int64_t wsum = 0;
      for (std::size_t c = 0; c < rows.cols; ++c) {
        w[c] = wq.code(rows.at(r, c));
        err[c] = std::abs(rows.at(r, c) - wq.dequantize(w[c]));
        wsum += w[c];
      }
      NodeId acc = g_.linear(in, w, -in_zero * wsum, tag(pre_role, layer, head, pos, static_cast<int>(r)));
      auto& an = g_.node(acc);
      an.centered = true;
      an.real_scale = wq.step() * in_scale;
      an.weight_error = std::move(err);
      an.weight_scale = wq.step();
      res.push_back(requantize(acc, out, out_qp, role, layer, head, pos, static_cast<int>(r)));
    }
    return res;
  }

  NodeId requantize(NodeId acc, const quant::QuantParams& out, std::int32_t out_qp, Role role, int layer, int head,
                    std::uint32_t pos, int index) {
    double s = g_.node(acc).real_scale;
    NodeId id = g_.lut(acc, [&](std::int64_t a) { return out.quantize(static_cast<double>(a) * s) - out.zero_point; },
                       tag(role, layer, head, pos, index));
    auto& n = g_.node(id);
    n.qparams = out_qp;
    n.centered = true;
    n.real_scale = out.scale;
    return id;
  }

  void segment(LayerCircuit& lc, std::uint32_t pos) {
    const int l = lc.layer;
    const int dh = mc_.d_head();
    const double attn = mc_.attention_scale();
    const std::int64_t top = lc.x.max_code();
    const std::int64_t recip = cfg_.recip();
    g_.begin_segment(l, static_cast<int>(pos));
    std::vector<std::vector<NodeId>> outs;
    for (int head : heads_) {
      int group = grouped_kv_map(head, mc_);
      std::vector<NodeId> x;
      for (int i = 0; i < mc_.d_emb; ++i) {
        NodeId id = g_.input(0, top, tag(Role::Input, l, head, pos, i), lc.qp["x"]);
        g_.node(id).real_scale = lc.x.scale;
        x.push_back(id);
      }
      auto q = project(x, lc.math.rotated_query_rows(head, pos), lc.wq, lc.x.scale, lc.x.zero_point, lc.q, lc.qp["q"],
                       Role::QProj, Role::Q, l, head, pos);
      auto k = project(x, lc.math.rotated_key_rows(group, pos), lc.wk, lc.x.scale, lc.x.zero_point, lc.k, lc.qp["k"],
                       Role::KProj, Role::K, l, head, pos);
      model::Matrix vrows(static_cast<std::size_t>(dh), static_cast<std::size_t>(mc_.d_emb));
      for (int r = 0; r < dh; ++r)
        for (int c = 0; c < mc_.d_emb; ++c)
          vrows.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
              lc.math.layer().v_proj.at(static_cast<std::size_t>(group * dh + r), static_cast<std::size_t>(c));
      auto v = project(x, vrows, lc.wv, lc.x.scale, lc.x.zero_point, lc.v, lc.qp["v"], Role::VProj, Role::V, l, head,
                       pos);
      lc.keys[head].push_back(k);
      lc.values[head].push_back(v);

      // Scores and the table-based softmax.
      const double score_scale = attn * lc.q.scale * lc.k.scale;
      std::vector<NodeId> exps;
      for (std::uint32_t j = 0; j <= pos; ++j) {
        std::vector<NodeId> prods;
        for (int i = 0; i < dh; ++i) {
          NodeId p = g_.ct_mult(q[static_cast<std::size_t>(i)], lc.keys[head][j][static_cast<std::size_t>(i)],
                                tag(Role::ScoreProd, l, head, pos, i, static_cast<int>(j)));
          g_.node(p).centered = true;
          g_.node(p).real_scale = score_scale;
          prods.push_back(p);
        }
        NodeId s = g_.add(prods, tag(Role::Score, l, head, pos, -1, static_cast<int>(j)));
        g_.node(s).qparams = lc.qp["score"];
        g_.node(s).centered = true;
        g_.node(s).real_scale = score_scale;
        const auto& eq = lc.exp;
        const double shift = lc.shift;
        NodeId e = g_.lut(
            s,
            [&](std::int64_t sv) {
              return std::max<std::int64_t>(1, eq.quantize(std::exp(static_cast<double>(sv) * score_scale - shift)));
            },
            tag(Role::Exp, l, head, pos, -1, static_cast<int>(j)));
        g_.node(e).qparams = lc.qp["exp"];
        g_.node(e).centered = true;
        g_.node(e).real_scale = eq.scale;
        exps.push_back(e);
      }
      NodeId sum = g_.add(exps, tag(Role::ExpSum, l, head, pos));
      g_.node(sum).real_scale = lc.exp.scale;
      NodeId r = g_.lut(
          sum,
          [&](std::int64_t t) {
            return static_cast<std::int64_t>(
                quant::round_half_even(static_cast<double>(recip) / static_cast<double>(std::max<std::int64_t>(t, 1))));
          },
          tag(Role::Recip, l, head, pos));
      std::vector<NodeId> probs;
      for (std::uint32_t j = 0; j <= pos; ++j) {
        NodeId pp = g_.ct_mult(exps[j], r, tag(Role::ProbProd, l, head, pos, -1, static_cast<int>(j)));
        const auto& pq = lc.prob;
        NodeId p = g_.lut(
            pp, [&](std::int64_t t) { return pq.quantize(static_cast<double>(t) / static_cast<double>(recip)); },
            tag(Role::Prob, l, head, pos, -1, static_cast<int>(j)));
        g_.node(p).qparams = lc.qp["prob"];
        g_.node(p).centered = true;
        g_.node(p).real_scale = pq.scale;
        probs.push_back(p);
      }

      // Context and output projection.
      const double ctx_pre_scale = lc.prob.scale * lc.v.scale;
      std::vector<NodeId> ctx;
      for (int i = 0; i < dh; ++i) {
        std::vector<NodeId> prods;
        for (std::uint32_t j = 0; j <= pos; ++j) {
          NodeId p = g_.ct_mult(probs[j], lc.values[head][j][static_cast<std::size_t>(i)],
                                tag(Role::CtxProd, l, head, pos, i, static_cast<int>(j)));
          g_.node(p).centered = true;
          g_.node(p).real_scale = ctx_pre_scale;
          prods.push_back(p);
        }
        NodeId pre = g_.add(prods, tag(Role::CtxPre, l, head, pos, i));
        g_.node(pre).centered = true;
        g_.node(pre).real_scale = ctx_pre_scale;
        ctx.push_back(requantize(pre, lc.ctx, lc.qp["ctx"], Role::Ctx, l, head, pos, i));
      }
      std::vector<NodeId> out;
      for (int row = 0; row < mc_.d_emb; ++row) {
        std::vector<std::int64_t> w(static_cast<std::size_t>(dh));
        std::vector<double> err(static_cast<std::size_t>(dh));
        for (int c = 0; c < dh; ++c) {
          double real = lc.math.out_weight(row, head, c);
          w[static_cast<std::size_t>(c)] = lc.wo.code(real);
          err[static_cast<std::size_t>(c)] = std::abs(real - lc.wo.dequantize(w[static_cast<std::size_t>(c)]));
        }
        NodeId o = g_.linear(ctx, w, 0, tag(Role::Out, l, head, pos, row));
        auto& on = g_.node(o);
        on.centered = true;
        on.real_scale = lc.wo.step() * lc.ctx.scale;
        on.weight_error = std::move(err);
        on.weight_scale = lc.wo.step();
        out.push_back(o);
      }
      outs.push_back(out);
    }
    for (int row = 0; row < mc_.d_emb; ++row) {
      if (cfg_.scope == HeadScope::Single) {
        g_.output(outs[0][static_cast<std::size_t>(row)]);
        continue;
      }
      std::vector<NodeId> parts;
      for (const auto& o : outs) parts.push_back(o[static_cast<std::size_t>(row)]);
      NodeId m = g_.add(parts, tag(Role::Merge, l, -1, pos, row));
      g_.node(m).centered = true;
      g_.node(m).real_scale = lc.wo.step() * lc.ctx.scale;
      g_.output(m);
    }
  }

  const EncAttnConfig& cfg_;
  const model::ModelConfig& mc_;
  std::vector<int> heads_;
  std::vector<LayerCircuit> layers_;
  Graph g_;
};

}  // namespace

Graph build_graph(const EncAttnConfig& cfg, const model::Weights& w, const CalibrationRecord& rec,
                  std::uint32_t seq_len) {
  cfg.validate(w.config);
  if (seq_len > static_cast<std::uint32_t>(w.config.max_seq_len))
    throw CompileError("seq_len " + std::to_string(seq_len) + " exceeds the model's max_seq_len");
  Builder b(cfg, w, rec);
  return b.build(seq_len);
}

}  // namespace pql3::attn
