#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pql3/quant/quant.hpp"

namespace pql3::circuit {

using NodeId = std::uint32_t;

// Linear and Add are free; every Lut is one PBS site and every CtMult two.
enum class NodeKind : std::uint8_t { Input = 0, Linear = 1, Add = 2, CtMult = 3, Lut = 4 };

// What a node computes in the attention block. Used for tracing and error
// bounds only; the executor ignores it.
enum class Role : std::uint8_t {
  Generic = 0,
  Input,
  QProj,      // q pre-activation (integer accumulator)
  Q,          // requantized, zero-centred q
  KProj,
  K,
  VProj,
  V,
  ScoreProd,  // q_i * k_i
  Score,      // sum over i
  Exp,
  ExpSum,
  Recip,
  ProbProd,   // e_j * r
  Prob,
  CtxProd,    // p_j * v_j
  CtxPre,     // sum over j
  Ctx,
  Out,        // per-head output-projection partial
  Merge,      // sum of head partials
  Refresh,    // identity bootstrap inserted by place_pbs
};

struct Tag {
  Role role = Role::Generic;
  std::int16_t layer = -1;
  std::int16_t head = -1;
  std::int32_t pos = -1;
  std::int32_t index = -1;   // coordinate within the head
  std::int32_t index2 = -1;  // key position for per-key nodes
  bool operator==(const Tag&) const = default;
};

// Message values are signed integers in [lo, hi], carried modulo p'.
struct Node {
  NodeKind kind = NodeKind::Input;
  std::vector<NodeId> inputs;
  std::vector<std::int64_t> weights;  // Linear
  std::int64_t constant = 0;          // Linear
  std::vector<std::int64_t> table;    // Lut: signed outputs indexed by (input - input.lo)
  std::int64_t lo = 0, hi = 0;
  std::int32_t qparams = -1;  // index into the graph's QuantParams table
  bool centered = false;      // value is code - zero_point, so real = value * scale
  double real_scale = 0.0;    // real units per unit of value, when meaningful
  std::vector<double> weight_error;  // Linear: |w_real - w_quantized| per input
  double weight_scale = 0.0;         // Linear: real value of one weight unit
  Tag tag;
  std::uint32_t segment = 0;
  double noise = 0.0;  // worst-case output noise, filled by compile()
};

// A (layer, position) slice of the circuit, executed in one client round trip.
struct Segment {
  std::int32_t layer = 0;
  std::int32_t pos = 0;
  NodeId begin = 0, end = 0;  // node index range
  std::vector<NodeId> inputs;
  std::vector<NodeId> outputs;
  std::uint64_t pbs_count = 0;
  bool operator==(const Segment&) const = default;
};

// Builder for a topologically ordered DAG. Nodes are appended to the current
// segment; ranges are derived by interval arithmetic as nodes are added.
class Graph {
 public:
  std::uint32_t begin_segment(int layer, int pos);

  NodeId input(std::int64_t lo, std::int64_t hi, Tag tag, std::int32_t qp = -1);
  NodeId linear(std::vector<NodeId> in, std::vector<std::int64_t> w, std::int64_t constant, Tag tag);
  NodeId add(std::vector<NodeId> in, Tag tag);
  NodeId ct_mult(NodeId a, NodeId b, Tag tag);
  // f maps an input value in [lo, hi] to a signed output value.
  NodeId lut(NodeId in, const std::function<std::int64_t(std::int64_t)>& f, Tag tag);
  void output(NodeId n);

  std::int32_t add_qparams(const quant::QuantParams& q);

  Node& node(NodeId id) { return nodes_.at(id); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<quant::QuantParams>& qparams() const { return qparams_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Compiler;
  NodeId push(Node n);
  std::vector<Node> nodes_;
  std::vector<Segment> segments_;
  std::vector<quant::QuantParams> qparams_;
};

}  // namespace pql3::circuit
