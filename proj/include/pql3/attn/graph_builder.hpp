#pragma once

#include "pql3/attn/calibration.hpp"
#include "pql3/circuit/graph.hpp"

namespace pql3::attn {

// Integer attention circuit for every target layer and position < seq_len,
// one segment per (layer, position), position-major. Per head in scope:
//   d_emb input codes -> q, k, v projections (rotation folded into the
//   per-position weights) -> requantize -> score products -> exp table ->
//   sum -> reciprocal table -> normalised probabilities -> context products
//   -> requantize -> output projection.
// Single scope outputs head 0's projected contribution; all-heads scope adds
// d_emb merge nodes summing the heads. Every head owns its input nodes, so
// node counts scale exactly with the number of heads.
// CompileError when a calibration entry is missing.
circuit::Graph build_graph(const EncAttnConfig& cfg, const model::Weights& w, const CalibrationRecord& rec,
                           std::uint32_t seq_len);

}  // namespace pql3::attn
