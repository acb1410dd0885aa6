#include "pql3/circuit/plan.hpp"

#include <algorithm>
#include <bit>

#include "pql3/common/error.hpp"

namespace pql3::circuit {

namespace {

constexpr char kMagic[4] = {'P', 'Q', 'P', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_ids(ByteWriter& w, const std::vector<NodeId>& ids) {
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (NodeId id : ids) w.u32(id);
}

std::vector<NodeId> read_ids(ByteReader& in, std::size_t limit) {
  std::uint32_t n = in.u32();
  if (n > limit) throw IoError("corrupt plan: id list too long");
  std::vector<NodeId> ids(n);
  for (auto& id : ids) id = in.u32();
  return ids;
}

void write_node(ByteWriter& w, const Node& n) {
  w.u8(static_cast<std::uint8_t>(n.kind));
  write_ids(w, n.inputs);
  w.u32(static_cast<std::uint32_t>(n.weights.size()));
  for (auto v : n.weights) w.i64(v);
  w.i64(n.constant);
  w.u32(static_cast<std::uint32_t>(n.table.size()));
  for (auto v : n.table) w.i64(v);
  w.i64(n.lo);
  w.i64(n.hi);
  w.u32(static_cast<std::uint32_t>(n.qparams));
  w.u8(n.centered ? 1 : 0);
  w.f64(n.real_scale);
  w.u32(static_cast<std::uint32_t>(n.weight_error.size()));
  for (double v : n.weight_error) w.f64(v);
  w.f64(n.weight_scale);
  w.u8(static_cast<std::uint8_t>(n.tag.role));
  w.u16(static_cast<std::uint16_t>(n.tag.layer));
  w.u16(static_cast<std::uint16_t>(n.tag.head));
  w.u32(static_cast<std::uint32_t>(n.tag.pos));
  w.u32(static_cast<std::uint32_t>(n.tag.index));
  w.u32(static_cast<std::uint32_t>(n.tag.index2));
  w.u32(n.segment);
  w.f64(n.noise);
}

Node read_node(ByteReader& in) {
  constexpr std::size_t kMaxList = 1u << 20;
  Node n;
  std::uint8_t kind = in.u8();
  if (kind > static_cast<std::uint8_t>(NodeKind::Lut)) throw IoError("corrupt plan: unknown node kind");
  n.kind = static_cast<NodeKind>(kind);
  n.inputs = read_ids(in, kMaxList);
  std::uint32_t nw = in.u32();
  if (nw > kMaxList) throw IoError("corrupt plan: weight list too long");
  n.weights.resize(nw);
  for (auto& v : n.weights) v = in.i64();
  n.constant = in.i64();
  std::uint32_t nt = in.u32();
  if (nt > kMaxList) throw IoError("corrupt plan: table too long");
  n.table.resize(nt);
  for (auto& v : n.table) v = in.i64();
  n.lo = in.i64();
  n.hi = in.i64();
  n.qparams = static_cast<std::int32_t>(in.u32());
  n.centered = in.u8() != 0;
  n.real_scale = in.f64();
  std::uint32_t ne = in.u32();
  if (ne > kMaxList) throw IoError("corrupt plan: error list too long");
  n.weight_error.resize(ne);
  for (auto& v : n.weight_error) v = in.f64();
  n.weight_scale = in.f64();
  n.tag.role = static_cast<Role>(in.u8());
  n.tag.layer = static_cast<std::int16_t>(in.u16());
  n.tag.head = static_cast<std::int16_t>(in.u16());
  n.tag.pos = static_cast<std::int32_t>(in.u32());
  n.tag.index = static_cast<std::int32_t>(in.u32());
  n.tag.index2 = static_cast<std::int32_t>(in.u32());
  n.segment = in.u32();
  n.noise = in.f64();
  return n;
}

}  // namespace

std::uint64_t ExecutionPlan::pbs_count() const { return pbs_count_for(seq_len); }

std::uint64_t ExecutionPlan::pbs_count_for(std::size_t positions) const {
  std::uint64_t n = 0;
  for (const auto& s : segments)
    if (static_cast<std::size_t>(s.pos) < positions) n += s.pbs_count;
  return n;
}

std::uint64_t ExecutionPlan::refresh_count() const {
  return static_cast<std::uint64_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.tag.role == Role::Refresh; }));
}

std::size_t ExecutionPlan::segment_index(int layer, int pos) const {
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].layer == layer && segments[i].pos == pos) return i;
  throw PlanError("plan has no segment for layer " + std::to_string(layer) + " position " + std::to_string(pos) +
                  " (compiled for " + std::to_string(seq_len) + " positions)");
}

const fhe::QuarterSquare& ExecutionPlan::product(NodeId id) const {
  auto it = products_.find(id);
  if (it == products_.end()) throw PlanError("node is not a product");
  return it->second;
}

const fhe::LookupTable& ExecutionPlan::table(NodeId id) const {
  auto it = tables_.find(id);
  if (it == tables_.end()) throw PlanError("node is not a table lookup");
  return it->second;
}

void ExecutionPlan::finalize() {
  products_.clear();
  tables_.clear();
  const fhe::u64 mask = params.plaintext_modulus() - 1;
  for (NodeId i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    for (NodeId in : n.inputs)
      if (in >= i) throw PlanError("plan nodes are not topologically ordered");
    if (n.kind == NodeKind::CtMult) {
      const Node &a = nodes[n.inputs.at(0)], &b = nodes[n.inputs.at(1)];
      products_.emplace(i, fhe::QuarterSquare::make(a.lo, a.hi, b.lo, b.hi, params));
    } else if (n.kind == NodeKind::Lut) {
      std::vector<fhe::u64> e(n.table.size());
      for (std::size_t k = 0; k < e.size(); ++k) e[k] = static_cast<fhe::u64>(n.table[k]) & mask;
      int bits = std::countr_zero(e.size());
      tables_.emplace(i, fhe::LookupTable(std::move(e), bits));
    }
  }
}

Bytes ExecutionPlan::serialize() const {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kVersion);
  auto fp = fingerprint();
  w.raw(std::span<const std::uint8_t>(fp));
  w.u32(seq_len);
  w.f64(compile_seconds);
  w.str(label);
  w.blob(params.serialize());
  w.u32(static_cast<std::uint32_t>(qparams.size()));
  for (const auto& q : qparams) q.serialize(w);
  w.u32(static_cast<std::uint32_t>(segments.size()));
  for (const auto& s : segments) {
    w.u32(static_cast<std::uint32_t>(s.layer));
    w.u32(static_cast<std::uint32_t>(s.pos));
    w.u32(s.begin);
    w.u32(s.end);
    write_ids(w, s.inputs);
    write_ids(w, s.outputs);
    w.u64(s.pbs_count);
  }
  w.u32(static_cast<std::uint32_t>(nodes.size()));
  for (const auto& n : nodes) write_node(w, n);
  return w.take();
}

ExecutionPlan ExecutionPlan::deserialize(std::span<const std::uint8_t> bytes, const fhe::CryptoParams& live) {
  ByteReader in(bytes);
  auto magic = in.raw(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw PlanError("not a plan file (bad magic)");
  if (auto v = in.u32(); v != kVersion) throw PlanError("unsupported plan version " + std::to_string(v));
  auto fp = in.raw(32);
  auto want = live.fingerprint();
  if (!std::equal(fp.begin(), fp.end(), want.begin())) throw PlanError("plan was compiled for different crypto parameters");
  ExecutionPlan p;
  p.seq_len = in.u32();
  p.compile_seconds = in.f64();
  p.label = in.str();
  {
    auto blob = in.blob();
    ByteReader pr(blob);
    p.params = fhe::CryptoParams::deserialize(pr);
  }
  auto own = p.params.fingerprint();
  if (!std::equal(own.begin(), own.end(), want.begin())) throw PlanError("plan parameters disagree with its fingerprint");
  p.params.rng_seed = live.rng_seed;
  std::uint32_t nq = in.u32();
  if (nq > (1u << 20)) throw IoError("corrupt plan: qparams table too long");
  for (std::uint32_t i = 0; i < nq; ++i) p.qparams.push_back(quant::QuantParams::deserialize(in));
  std::uint32_t ns = in.u32();
  if (ns > (1u << 20)) throw IoError("corrupt plan: segment table too long");
  for (std::uint32_t i = 0; i < ns; ++i) {
    Segment s;
    s.layer = static_cast<std::int32_t>(in.u32());
    s.pos = static_cast<std::int32_t>(in.u32());
    s.begin = in.u32();
    s.end = in.u32();
    s.inputs = read_ids(in, 1u << 20);
    s.outputs = read_ids(in, 1u << 20);
    s.pbs_count = in.u64();
    p.segments.push_back(std::move(s));
  }
  std::uint32_t nn = in.u32();
  if (nn > (1u << 24)) throw IoError("corrupt plan: node table too long");
  for (std::uint32_t i = 0; i < nn; ++i) p.nodes.push_back(read_node(in));
  in.expect_end();
  for (const auto& s : p.segments) {
    if (s.begin > s.end || s.end > nn) throw PlanError("corrupt plan: segment range");
    for (NodeId id : s.inputs) if (id >= nn) throw PlanError("corrupt plan: segment input");
    for (NodeId id : s.outputs) if (id >= nn) throw PlanError("corrupt plan: segment output");
  }
  for (const auto& n : p.nodes)
    if (n.qparams >= static_cast<std::int32_t>(nq)) throw PlanError("corrupt plan: qparams index");
  p.finalize();
  return p;
}

std::int64_t decode_signed(std::uint64_t residue, const Node& n, const fhe::CryptoParams& p) {
  const std::uint64_t pm = p.plaintext_modulus();
  std::uint64_t off = (residue - static_cast<std::uint64_t>(n.lo)) & (pm - 1);
  return n.lo + static_cast<std::int64_t>(off);
}

}  // namespace pql3::circuit
