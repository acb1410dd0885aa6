#include "pql3/attn/reference.hpp"

#include <cmath>
#include <limits>

#include "pql3/model/layers.hpp"

namespace pql3::attn {

using circuit::NodeId;
using circuit::NodeKind;
using circuit::Role;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

BlockReference::BlockReference(const model::Weights& w, const EncAttnConfig& cfg) : w_(w), cfg_(cfg) {
  for (int l : cfg.target_layers) math_.emplace(l, HeadMath(w, l));
}

void BlockReference::reset() { steps_.clear(); }

void BlockReference::step(int layer, std::size_t pos, std::span<const double> h) {
  const auto& mc = w_.config;
  const auto& m = math_.at(layer);
  auto& steps = steps_[layer];
  if (steps.size() != pos) throw ShapeError("reference positions must arrive in order");
  PosStep ps;
  ps.h.assign(h.begin(), h.end());
  ps.merge.assign(static_cast<std::size_t>(mc.d_emb), 0.0);
  for (int head : cfg_.heads(mc)) {
    int g = grouped_kv_map(head, mc);
    HeadStep hs;
    hs.q = m.query(head, pos, h);
    hs.k = m.key(g, pos, h);
    hs.v = m.value(g, h);
    hs.scores.resize(pos + 1);
    for (std::size_t j = 0; j <= pos; ++j) {
      const auto& k = j == pos ? hs.k : steps[j].heads.at(head).k;
      double acc = 0;
      for (std::size_t i = 0; i < hs.q.size(); ++i) acc += hs.q[i] * k[i];
      hs.scores[j] = acc * mc.attention_scale();
    }
    hs.probs = model::softmax(hs.scores);
    hs.ctx.assign(hs.q.size(), 0.0);
    for (std::size_t j = 0; j <= pos; ++j) {
      const auto& v = j == pos ? hs.v : steps[j].heads.at(head).v;
      for (std::size_t i = 0; i < hs.ctx.size(); ++i) hs.ctx[i] += hs.probs[j] * v[i];
    }
    hs.out.assign(static_cast<std::size_t>(mc.d_emb), 0.0);
    for (int r = 0; r < mc.d_emb; ++r)
      for (int c = 0; c < mc.d_head(); ++c)
        hs.out[static_cast<std::size_t>(r)] += m.out_weight(r, head, c) * hs.ctx[static_cast<std::size_t>(c)];
    for (std::size_t r = 0; r < ps.merge.size(); ++r) ps.merge[r] += hs.out[r];
    ps.heads.emplace(head, std::move(hs));
  }
  steps.push_back(std::move(ps));
}

double BlockReference::value(const circuit::Tag& t) const {
  auto it = steps_.find(t.layer);
  if (it == steps_.end() || t.pos < 0 || static_cast<std::size_t>(t.pos) >= it->second.size()) return kNaN;
  const auto& ps = it->second[static_cast<std::size_t>(t.pos)];
  auto i = static_cast<std::size_t>(std::max(t.index, 0));
  auto j = static_cast<std::size_t>(std::max(t.index2, 0));
  if (t.role == Role::Input) return ps.h.at(i);
  if (t.role == Role::Merge) return ps.merge.at(i);
  auto hit = ps.heads.find(t.head);
  if (hit == ps.heads.end()) return kNaN;
  const auto& hs = hit->second;
  switch (t.role) {
    case Role::QProj:
    case Role::Q:
      return hs.q.at(i);
    case Role::KProj:
    case Role::K:
      return hs.k.at(i);
    case Role::VProj:
    case Role::V:
      return hs.v.at(i);
    case Role::Score:
      return hs.scores.at(j);
    case Role::Prob:
      return hs.probs.at(j);
    case Role::CtxPre:
    case Role::Ctx:
      return hs.ctx.at(i);
    case Role::Out:
      return hs.out.at(i);
    default:
      return kNaN;
  }
}

BoundTracker::BoundTracker(const circuit::ExecutionPlan& plan) : plan_(plan) { reset(); }

void BoundTracker::reset() {
  bound_.assign(plan_.nodes.size(), kNaN);
  real_.assign(plan_.nodes.size(), kNaN);
}

double BoundTracker::real(NodeId id, std::int64_t v) const {
  const auto& n = plan_.nodes[id];
  if (!n.centered && n.qparams >= 0) return plan_.qparams[static_cast<std::size_t>(n.qparams)].dequantize_affine(v);
  return static_cast<double>(v) * n.real_scale;
}

void BoundTracker::update(std::size_t segment, const std::function<std::int64_t(NodeId)>& value,
                          std::span<const double> h) {
  const auto& seg = plan_.segments.at(segment);
  for (NodeId id = seg.begin; id < seg.end; ++id) real_[id] = real(id, value(id));
  for (NodeId id = seg.begin; id < seg.end; ++id) {
    const auto& n = plan_.nodes[id];
    double b = kNaN;
    auto in_b = [&](std::size_t k) { return bound_[n.inputs[k]]; };
    auto in_r = [&](std::size_t k) { return real_[n.inputs[k]]; };
    switch (n.kind) {
      case NodeKind::Input:
        b = std::abs(h[static_cast<std::size_t>(n.tag.index)] - real_[id]);
        break;
      case NodeKind::Linear:
        // |W h - W^ h^| <= sum |W - W^| |h| + |W^| |h - h^|, with |h| <= |h^| + B.
        if (n.weight_error.size() == n.inputs.size()) {
          b = 0;
          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            double w_hat = std::abs(static_cast<double>(n.weights[k]) * n.weight_scale);
            b += n.weight_error[k] * (std::abs(in_r(k)) + in_b(k)) + w_hat * in_b(k);
          }
        }
        break;
      case NodeKind::Add:
        b = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) b += in_b(k);
        break;
      case NodeKind::CtMult: {
        const auto &a = plan_.nodes[n.inputs[0]], &c = plan_.nodes[n.inputs[1]];
        double factor = n.real_scale / (a.real_scale * c.real_scale);
        b = factor * (std::abs(in_r(0)) * in_b(1) + std::abs(in_r(1)) * in_b(0) + in_b(0) * in_b(1));
        break;
      }
      case NodeKind::Lut:
        switch (n.tag.role) {
          case Role::Refresh:
            b = in_b(0);
            break;
          case Role::Q:
          case Role::K:
          case Role::V:
          case Role::Ctx:
            b = in_b(0) + std::abs(in_r(0) - real_[id]);
            break;
          case Role::Prob: {
            // Softmax over score intervals: p_j is smallest when its own score
            // is at the bottom and every other at the top, and vice versa.
            std::vector<double> lo, hi;
            std::size_t self = 0;
            for (NodeId s = seg.begin; s < seg.end; ++s) {
              const auto& sn = plan_.nodes[s];
              if (sn.tag.role != Role::Score || sn.tag.head != n.tag.head || sn.tag.layer != n.tag.layer) continue;
              if (sn.tag.index2 == n.tag.index2) self = lo.size();
              lo.push_back(real_[s] - bound_[s]);
              hi.push_back(real_[s] + bound_[s]);
            }
            double ref = *std::max_element(hi.begin(), hi.end());
            double lo_other = 0, hi_other = 0;
            for (std::size_t k = 0; k < lo.size(); ++k)
              if (k != self) {
                lo_other += std::exp(lo[k] - ref);
                hi_other += std::exp(hi[k] - ref);
              }
            double p_min = std::exp(lo[self] - ref) / (std::exp(lo[self] - ref) + hi_other);
            double p_max = std::exp(hi[self] - ref) / (std::exp(hi[self] - ref) + lo_other);
            b = std::max(std::abs(real_[id] - p_min), std::abs(real_[id] - p_max));
            break;
          }
          default:
            break;
        }
        break;
    }
    bound_[id] = b;
  }
}

}  // namespace pql3::attn
