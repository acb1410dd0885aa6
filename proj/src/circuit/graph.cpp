#include "pql3/circuit/graph.hpp"

#include <algorithm>
#include <bit>

#include "pql3/common/error.hpp"

namespace pql3::circuit {

namespace {

int span_bits(std::int64_t lo, std::int64_t hi) {
  return std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(hi - lo))));
}

}  // namespace

std::uint32_t Graph::begin_segment(int layer, int pos) {
  Segment s;
  s.layer = layer;
  s.pos = pos;
  s.begin = s.end = static_cast<NodeId>(nodes_.size());
  segments_.push_back(s);
  return static_cast<std::uint32_t>(segments_.size() - 1);
}

NodeId Graph::push(Node n) {
  if (segments_.empty()) throw CompileError("graph nodes must belong to a segment");
  for (NodeId i : n.inputs)
    if (i >= nodes_.size()) throw CompileError("node input refers to a later node");
  n.segment = static_cast<std::uint32_t>(segments_.size() - 1);
  nodes_.push_back(std::move(n));
  auto id = static_cast<NodeId>(nodes_.size() - 1);
  segments_.back().end = id + 1;
  return id;
}

NodeId Graph::input(std::int64_t lo, std::int64_t hi, Tag tag, std::int32_t qp) {
  if (lo > hi) throw CompileError("empty input range");
  Node n;
  n.kind = NodeKind::Input;
  n.lo = lo;
  n.hi = hi;
  n.tag = tag;
  n.qparams = qp;
  auto id = push(std::move(n));
  segments_.back().inputs.push_back(id);
  return id;
}

NodeId Graph::linear(std::vector<NodeId> in, std::vector<std::int64_t> w, std::int64_t constant, Tag tag) {
  if (in.empty() || in.size() != w.size()) throw CompileError("linear node needs one weight per input");
  Node n;
  n.kind = NodeKind::Linear;
  n.lo = n.hi = constant;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Node& x = node(in[i]);
    std::int64_t a = w[i] * x.lo, b = w[i] * x.hi;
    n.lo += std::min(a, b);
    n.hi += std::max(a, b);
  }
  n.inputs = std::move(in);
  n.weights = std::move(w);
  n.constant = constant;
  n.tag = tag;
  return push(std::move(n));
}

NodeId Graph::add(std::vector<NodeId> in, Tag tag) {
  if (in.empty()) throw CompileError("add node needs inputs");
  Node n;
  n.kind = NodeKind::Add;
  for (NodeId i : in) {
    n.lo += node(i).lo;
    n.hi += node(i).hi;
  }
  n.inputs = std::move(in);
  n.tag = tag;
  return push(std::move(n));
}

NodeId Graph::ct_mult(NodeId a, NodeId b, Tag tag) {
  const Node &x = node(a), &y = node(b);
  std::int64_t c[] = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
  Node n;
  n.kind = NodeKind::CtMult;
  n.inputs = {a, b};
  n.lo = *std::min_element(std::begin(c), std::end(c));
  n.hi = *std::max_element(std::begin(c), std::end(c));
  n.tag = tag;
  return push(std::move(n));
}

NodeId Graph::lut(NodeId in, const std::function<std::int64_t(std::int64_t)>& f, Tag tag) {
  const Node& x = node(in);
  std::size_t size = std::size_t{1} << span_bits(x.lo, x.hi);
  Node n;
  n.kind = NodeKind::Lut;
  n.inputs = {in};
  n.table.resize(size);
  for (std::size_t k = 0; k < size; ++k) {
    // Indices past the range are unreachable; they repeat the top entry.
    std::int64_t v = std::min(x.lo + static_cast<std::int64_t>(k), x.hi);
    n.table[k] = f(v);
  }
  std::size_t reachable = static_cast<std::size_t>(x.hi - x.lo) + 1;
  n.lo = *std::min_element(n.table.begin(), n.table.begin() + static_cast<std::ptrdiff_t>(reachable));
  n.hi = *std::max_element(n.table.begin(), n.table.begin() + static_cast<std::ptrdiff_t>(reachable));
  n.tag = tag;
  return push(std::move(n));
}

void Graph::output(NodeId n) {
  if (n >= nodes_.size()) throw CompileError("output refers to a missing node");
  segments_.back().outputs.push_back(n);
}

std::int32_t Graph::add_qparams(const quant::QuantParams& q) {
  qparams_.push_back(q);
  return static_cast<std::int32_t>(qparams_.size() - 1);
}

}  // namespace pql3::circuit
