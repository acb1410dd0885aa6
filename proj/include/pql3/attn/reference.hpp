#pragma once

#include <functional>
#include <map>

#include "pql3/attn/config.hpp"
#include "pql3/attn/head_math.hpp"
#include "pql3/circuit/plan.hpp"

namespace pql3::attn {

// The plain floating-point attention block, node by node: the values the
// integer circuit approximates. Feed it the normalised inputs of each
// (layer, position) in order.
class BlockReference {
 public:
  BlockReference(const model::Weights& w, const EncAttnConfig& cfg);

  void reset();
  void step(int layer, std::size_t pos, std::span<const double> h);
  // NaN for roles without a plain counterpart (tables internals, products).
  double value(const circuit::Tag& t) const;

 private:
  struct HeadStep {
    model::Vec q, k, v, scores, probs, ctx, out;
  };
  struct PosStep {
    model::Vec h;
    std::map<int, HeadStep> heads;
    model::Vec merge;
  };
  const model::Weights& w_;
  EncAttnConfig cfg_;
  std::map<int, HeadMath> math_;
  std::map<int, std::vector<PosStep>> steps_;  // per layer
};

// A-posteriori bound on |plain value - dequantized circuit value| for every
// node, composed from the plan's scales and weight errors, the circuit's own
// integer values and the input quantization error. Segments are consumed in
// execution order; keys and values of earlier positions carry their bounds.
class BoundTracker {
 public:
  explicit BoundTracker(const circuit::ExecutionPlan& plan);

  void reset();
  // `value(id)` gives the signed circuit value of any node evaluated so far;
  // `h` is the real input vector of the segment.
  void update(std::size_t segment, const std::function<std::int64_t(circuit::NodeId)>& value,
              std::span<const double> h);
  double bound(circuit::NodeId id) const { return bound_.at(id); }
  // Real value a circuit value stands for.
  double real(circuit::NodeId id, std::int64_t v) const;

 private:
  const circuit::ExecutionPlan& plan_;
  std::vector<double> bound_;
  std::vector<double> real_;
};

}  // namespace pql3::attn
