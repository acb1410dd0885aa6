#pragma once

#include <atomic>
#include <bit>
#include <thread>
#include <vector>

#include "pql3/circuit/plan.hpp"
#include "pql3/common/error.hpp"

namespace pql3::circuit {

// Plaintext evaluation of a plan over residues modulo p'. Used by simulate
// mode and as the oracle for the encrypted backend.
class ClearBackend {
 public:
  using Value = fhe::u64;
  explicit ClearBackend(const ExecutionPlan& plan) : plan_(plan), mask_(plan.params.plaintext_modulus() - 1) {}

  Value linear(const Node& n, const std::vector<const Value*>& xs) const {
    fhe::u64 acc = static_cast<fhe::u64>(n.constant);
    for (std::size_t k = 0; k < xs.size(); ++k) {
      fhe::u64 w = n.kind == NodeKind::Linear ? static_cast<fhe::u64>(n.weights[k]) : 1;
      acc += w * *xs[k];
    }
    return acc & mask_;
  }
  Value lut(NodeId id, const Node& n, const Node& in, const Value& x) const {
    fhe::u64 idx = (x - static_cast<fhe::u64>(in.lo)) & mask_;
    if (idx >= n.table.size()) throw RangeError("table input outside its declared range");
    return plan_.table(id)(idx);
  }
  Value product(NodeId id, const Value& x, const Value& y) const { return plan_.product(id).clear(x, y, plan_.params); }

 private:
  const ExecutionPlan& plan_;
  fhe::u64 mask_;
};

// Homomorphic evaluation. Holds only server material: the PBS engine.
class CipherBackend {
 public:
  using Value = fhe::LweCiphertext;
  CipherBackend(const ExecutionPlan& plan, const fhe::PbsEngine& engine) : plan_(plan), engine_(engine) {}

  Value linear(const Node& n, const std::vector<const Value*>& xs) const {
    std::vector<std::int64_t> ones;
    std::span<const std::int64_t> w = n.weights;
    if (n.kind == NodeKind::Add) {
      ones.assign(xs.size(), 1);
      w = ones;
    }
    return fhe::linear_combination(xs, w, n.constant, plan_.params.total_bits());
  }
  Value lut(NodeId id, const Node&, const Node& in, const Value& x) const {
    const auto& table = plan_.table(id);
    const Value* one[] = {&x};
    const std::int64_t unit[] = {1};
    auto shifted = fhe::linear_combination(one, unit, -in.lo, table.input_bits());
    return fhe::with_space(fhe::pbs(shifted, table, engine_), plan_.params.total_bits());
  }
  Value product(NodeId id, const Value& x, const Value& y) const {
    return fhe::with_space(plan_.product(id).apply(x, y, engine_), plan_.params.total_bits());
  }

  const fhe::PbsEngine& engine() const { return engine_; }

 private:
  const ExecutionPlan& plan_;
  const fhe::PbsEngine& engine_;
};

// Runs a plan one segment at a time. Values of earlier segments stay
// resident (later positions read the keys and values of earlier ones).
// Nodes of equal depth inside a segment are independent and may be spread
// over `threads` workers; the PBS tally stays exact either way.
template <class Backend>
class Executor {
 public:
  using Value = typename Backend::Value;

  Executor(const ExecutionPlan& plan, Backend backend, unsigned threads = 1)
      : plan_(plan), backend_(std::move(backend)), threads_(std::max(1u, threads)) {
    reset();
  }

  void reset() {
    values_.assign(plan_.nodes.size(), Value{});
    ready_.assign(plan_.nodes.size(), 0);
    pbs_sites_.store(0);
  }

  void set_input(NodeId id, Value v) {
    if (plan_.nodes.at(id).kind != NodeKind::Input) throw PlanError("node is not an input");
    values_[id] = std::move(v);
    ready_[id] = 1;
  }

  void run_segment(std::size_t index) {
    const Segment& s = plan_.segments.at(index);
    for (NodeId id : s.inputs)
      if (!ready_[id]) throw PlanError("segment input " + std::to_string(id) + " was not provided");
    if (threads_ == 1) {
      for (NodeId id = s.begin; id < s.end; ++id) eval(id);
      return;
    }
    // Group the segment's nodes by depth, then evaluate each level in parallel.
    std::vector<std::vector<NodeId>> levels;
    std::vector<std::size_t> depth(s.end - s.begin, 0);
    for (NodeId id = s.begin; id < s.end; ++id) {
      std::size_t d = 0;
      for (NodeId in : plan_.nodes[id].inputs)
        if (in >= s.begin) d = std::max(d, depth[in - s.begin] + 1);
      depth[id - s.begin] = d;
      if (levels.size() <= d) levels.resize(d + 1);
      levels[d].push_back(id);
    }
    for (const auto& level : levels) {
      std::atomic<std::size_t> next{0};
      auto work = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < level.size();) eval(level[k]);
      };
      std::vector<std::thread> pool;
      std::size_t n = std::min<std::size_t>(threads_, level.size());
      for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
      work();
      for (auto& t : pool) t.join();
    }
  }

  void run_all() {
    for (std::size_t k = 0; k < plan_.segments.size(); ++k) run_segment(k);
  }

  const Value& value(NodeId id) const {
    if (!ready_.at(id)) throw PlanError("node " + std::to_string(id) + " has not been evaluated");
    return values_[id];
  }

  // PBS sites executed since the last reset (1 per table, 2 per product).
  std::uint64_t pbs_sites() const { return pbs_sites_.load(); }
  const Backend& backend() const { return backend_; }

 private:
  void eval(NodeId id) {
    const Node& n = plan_.nodes[id];
    if (n.kind == NodeKind::Input) {
      if (!ready_[id]) throw PlanError("input " + std::to_string(id) + " was not provided");
      return;
    }
    std::vector<const Value*> xs;
    xs.reserve(n.inputs.size());
    for (NodeId in : n.inputs) xs.push_back(&value(in));
    switch (n.kind) {
      case NodeKind::Linear:
      case NodeKind::Add:
        values_[id] = backend_.linear(n, xs);
        break;
      case NodeKind::Lut:
        values_[id] = backend_.lut(id, n, plan_.nodes[n.inputs[0]], *xs[0]);
        pbs_sites_.fetch_add(1, std::memory_order_relaxed);
        break;
      case NodeKind::CtMult:
        values_[id] = backend_.product(id, *xs[0], *xs[1]);
        pbs_sites_.fetch_add(2, std::memory_order_relaxed);
        break;
      case NodeKind::Input:
        break;
    }
    ready_[id] = 1;
  }

  const ExecutionPlan& plan_;
  Backend backend_;
  unsigned threads_;
  std::vector<Value> values_;
  std::vector<unsigned char> ready_;
  std::atomic<std::uint64_t> pbs_sites_{0};
};

using ClearExecutor = Executor<ClearBackend>;
using CipherExecutor = Executor<CipherBackend>;

// Residue of a signed value for a clear input.
inline fhe::u64 encode_residue(std::int64_t v, const fhe::CryptoParams& p) {
  return static_cast<fhe::u64>(v) & (p.plaintext_modulus() - 1);
}

}  // namespace pql3::circuit
