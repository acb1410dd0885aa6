#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "pql3/circuit/plan.hpp"
#include "pql3/common/error.hpp"

namespace pql3::circuit {

namespace {

int span_bits(std::int64_t lo, std::int64_t hi) {
  return std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(hi - lo))));
}

}  // namespace

// Emits nodes in the original order, inserting refresh bootstraps (or
// re-emitting a linear node over refreshed operands) whenever a node's
// worst-case operand noise would reach its budget:
//   Lut, CtMult: operand noise < pbs_budget
//   Linear, Add: output noise < decrypt_budget (Delta / 2)
class Compiler {
 public:
  Compiler(const Graph& g, const fhe::CryptoParams& p) : g_(g), p_(p) {}

  void run() {
    std::vector<NodeId> map(g_.size());
    for (NodeId i = 0; i < g_.size(); ++i) {
      Node n = g_.node(i);
      for (auto& in : n.inputs) in = map[in];
      check_ranges(n);
      map[i] = emit(std::move(n), g_.node(i).segment, std::numeric_limits<double>::infinity());
    }
    segments_ = g_.segments();
    for (auto& s : segments_) {
      for (auto& id : s.inputs) id = map[id];
      for (auto& id : s.outputs) id = map[id];
    }
    eliminate_dead();
  }

  std::vector<Node> nodes;
  std::vector<Segment> segments_;

 private:
  double noise(NodeId id) const { return nodes[id].noise; }

  double pre_noise(const Node& n) const {
    double e = 0;
    switch (n.kind) {
      case NodeKind::Input:
        return 0;
      case NodeKind::Linear:
        for (std::size_t k = 0; k < n.inputs.size(); ++k)
          e += static_cast<double>(std::llabs(n.weights[k])) * noise(n.inputs[k]);
        return e;
      case NodeKind::Add:
      case NodeKind::CtMult:
        for (NodeId in : n.inputs) e += noise(in);
        return e;
      case NodeKind::Lut:
        return noise(n.inputs[0]);
    }
    return e;
  }

  double limit(const Node& n) const {
    switch (n.kind) {
      case NodeKind::Lut:
      case NodeKind::CtMult:
        return p_.pbs_budget();
      case NodeKind::Linear:
      case NodeKind::Add:
        return p_.decrypt_budget();
      case NodeKind::Input:
        break;
    }
    return std::numeric_limits<double>::infinity();
  }

  double out_noise(const Node& n) const {
    switch (n.kind) {
      case NodeKind::Input:
        return p_.fresh_noise;
      case NodeKind::Lut:
        return p_.pbs_noise();
      case NodeKind::CtMult:
        return 2 * p_.pbs_noise();
      default:
        return pre_noise(n);
    }
  }

  double contribution(const Node& n, std::size_t k) const {
    double w = n.kind == NodeKind::Linear ? static_cast<double>(std::llabs(n.weights[k])) : 1.0;
    return w * noise(n.inputs[k]);
  }

  void check_ranges(const Node& n) const {
    auto pm = static_cast<std::int64_t>(p_.plaintext_modulus());
    if (n.hi - n.lo >= pm)
      throw CompileError("value range [" + std::to_string(n.lo) + ", " + std::to_string(n.hi) +
                         "] does not fit the plaintext modulus " + std::to_string(pm));
    if (n.kind == NodeKind::Lut) {
      const Node& in = nodes[n.inputs[0]];
      if (span_bits(in.lo, in.hi) > p_.total_bits() - 1)
        throw CompileError("table input span " + std::to_string(in.hi - in.lo) + " needs more than " +
                           std::to_string(p_.total_bits() - 1) + " bits");
    }
    if (n.kind == NodeKind::CtMult) {
      const Node &a = nodes[n.inputs[0]], &b = nodes[n.inputs[1]];
      try {
        fhe::QuarterSquare::make(a.lo, a.hi, b.lo, b.hi, p_);
      } catch (const RangeError& e) {
        throw CompileError(std::string("product operands too wide: ") + e.what());
      }
    }
  }

  bool refreshable(const Node& u) const {
    return u.noise < p_.pbs_budget() && span_bits(u.lo, u.hi) <= p_.total_bits() - 1;
  }

  NodeId emit(Node n, std::uint32_t segment, double extra_limit) {
    n.segment = segment;
    std::set<NodeId> stuck;
    while (pre_noise(n) >= std::min(limit(n), extra_limit)) {
      int best = -1;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        NodeId id = n.inputs[k];
        if (stuck.count(id) || noise(id) <= p_.pbs_noise()) continue;
        if (best < 0 || contribution(n, k) > contribution(n, static_cast<std::size_t>(best))) best = static_cast<int>(k);
      }
      if (best < 0)
        throw CompileError("node exceeds the noise budget even with fresh operands (worst case " +
                           std::to_string(pre_noise(n)) + " >= " + std::to_string(std::min(limit(n), extra_limit)) +
                           ")");
      NodeId from = n.inputs[static_cast<std::size_t>(best)];
      NodeId to = reduce(from, segment);
      if (noise(to) >= noise(from)) {
        stuck.insert(from);
        continue;
      }
      std::replace(n.inputs.begin(), n.inputs.end(), from, to);
    }
    n.noise = out_noise(n);
    nodes.push_back(std::move(n));
    return static_cast<NodeId>(nodes.size() - 1);
  }

  // A node computing the same value as `id` with lower noise.
  NodeId reduce(NodeId id, std::uint32_t segment) {
    if (auto it = reduced_.find(id); it != reduced_.end()) return it->second;
    const Node& u = nodes[id];
    NodeId r;
    if (refreshable(u)) {
      Node f;
      f.kind = NodeKind::Lut;
      f.inputs = {id};
      f.table.resize(std::size_t{1} << span_bits(u.lo, u.hi));
      for (std::size_t k = 0; k < f.table.size(); ++k) f.table[k] = std::min(u.lo + static_cast<std::int64_t>(k), u.hi);
      f.lo = u.lo;
      f.hi = u.hi;
      f.qparams = u.qparams;
      f.centered = u.centered;
      f.real_scale = u.real_scale;
      f.tag = u.tag;
      f.tag.role = Role::Refresh;
      r = emit(std::move(f), segment, std::numeric_limits<double>::infinity());
    } else if (u.kind == NodeKind::Linear || u.kind == NodeKind::Add) {
      Node copy = u;
      r = emit(std::move(copy), segment, p_.pbs_budget());
    } else {
      throw CompileError("cannot lower the noise of a bootstrapped node");
    }
    reduced_[id] = r;
    return r;
  }

  void eliminate_dead() {
    std::vector<char> live(nodes.size(), 0);
    for (const auto& s : segments_) {
      for (NodeId id : s.inputs) live[id] = 1;
      for (NodeId id : s.outputs) live[id] = 1;
    }
    for (std::size_t i = nodes.size(); i-- > 0;)
      if (live[i])
        for (NodeId in : nodes[i].inputs) live[in] = 1;
    std::vector<NodeId> remap(nodes.size(), 0);
    std::vector<Node> kept;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!live[i]) continue;
      remap[i] = static_cast<NodeId>(kept.size());
      Node n = std::move(nodes[i]);
      for (auto& in : n.inputs) in = remap[in];
      kept.push_back(std::move(n));
    }
    nodes = std::move(kept);
    for (auto& s : segments_) {
      for (auto& id : s.inputs) id = remap[id];
      for (auto& id : s.outputs) id = remap[id];
    }
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      auto& s = segments_[k];
      s.begin = s.end = 0;
      s.pbs_count = 0;
      bool seen = false;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].segment != k) continue;
        if (!seen) s.begin = static_cast<NodeId>(i);
        seen = true;
        s.end = static_cast<NodeId>(i + 1);
        if (nodes[i].kind == NodeKind::Lut) s.pbs_count += 1;
        if (nodes[i].kind == NodeKind::CtMult) s.pbs_count += 2;
      }
      if (!seen) s.begin = s.end = static_cast<NodeId>(nodes.size());
    }
    for (std::size_t i = 1; i < nodes.size(); ++i)
      if (nodes[i].segment < nodes[i - 1].segment) throw CompileError("segments are not contiguous");
  }

  const Graph& g_;
  const fhe::CryptoParams& p_;
  std::map<NodeId, NodeId> reduced_;
};

ExecutionPlan compile(const Graph& g, const fhe::CryptoParams& params, std::uint32_t seq_len, std::string label) {
  auto t0 = std::chrono::steady_clock::now();
  try {
    params.validate();
  } catch (const ParameterError& e) {
    throw CompileError(std::string("invalid crypto parameters: ") + e.what());
  }
  Compiler c(g, params);
  c.run();
  ExecutionPlan plan;
  plan.params = params;
  plan.seq_len = seq_len;
  plan.label = std::move(label);
  plan.nodes = std::move(c.nodes);
  plan.segments = std::move(c.segments_);
  plan.qparams = g.qparams();
  plan.finalize();
  plan.compile_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return plan;
}

}  // namespace pql3::circuit
