#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pql3/circuit/graph.hpp"
#include "pql3/fhe/ops.hpp"

namespace pql3::circuit {

// Compiled circuit: PBS placement fixed, static PBS count known, ranges and
// worst-case noise proven for every node. Immutable once built.
class ExecutionPlan {
 public:
  fhe::CryptoParams params;
  std::uint32_t seq_len = 0;
  double compile_seconds = 0.0;
  std::string label;  // configuration key the plan was compiled for
  std::vector<Node> nodes;
  std::vector<quant::QuantParams> qparams;
  std::vector<Segment> segments;

  std::uint64_t pbs_count() const;
  // Bootstraps executed by the segments of the first `positions` positions.
  std::uint64_t pbs_count_for(std::size_t positions) const;
  std::uint64_t refresh_count() const;
  // Index of the (layer, pos) segment; PlanError if absent.
  std::size_t segment_index(int layer, int pos) const;
  const fhe::QuarterSquare& product(NodeId id) const;
  const fhe::LookupTable& table(NodeId id) const;

  std::array<std::uint8_t, 32> fingerprint() const { return params.fingerprint(); }

  // "PQPL", u32 version, 32-byte parameter fingerprint, u32 seq_len,
  // f64 compile_seconds, label, parameters, qparams table, segment table,
  // node table.
  Bytes serialize() const;
  // PlanError on a version or fingerprint mismatch against `live`.
  static ExecutionPlan deserialize(std::span<const std::uint8_t> bytes, const fhe::CryptoParams& live);

  // Rebuilds derived state (quarter-square tables); called by compile and
  // deserialize.
  void finalize();

 private:
  std::map<NodeId, fhe::QuarterSquare> products_;
  std::map<NodeId, fhe::LookupTable> tables_;
};

// Range validation, PBS placement and noise annotation. Refresh bootstraps
// (identity tables) are inserted wherever an operand would reach its budget;
// CompileError when a node cannot be brought under budget.
ExecutionPlan compile(const Graph& g, const fhe::CryptoParams& params, std::uint32_t seq_len, std::string label = {});

inline std::uint64_t static_pbs_count(const ExecutionPlan& p) { return p.pbs_count(); }

// Signed value of a residue for a node with range [lo, hi].
std::int64_t decode_signed(std::uint64_t residue, const Node& n, const fhe::CryptoParams& p);

}  // namespace pql3::circuit
