#pragma once

#include <memory>

#include "pql3/attn/config.hpp"
#include "pql3/attn/evaluator.hpp"
#include "pql3/model/generate.hpp"
#include "pql3/model/model.hpp"

namespace pql3::attn {

// One attention call routed through the circuit.
struct AttendRecord {
  int layer = 0;
  std::size_t pos = 0;
  model::Vec input;                   // normalised layer input
  std::vector<std::int64_t> codes;    // quantized inputs sent to the segment
  std::vector<std::int64_t> outputs;  // signed circuit outputs
  model::Vec contribution;            // dequantized outputs added to the layer
  model::Vec noise;                   // worst-case encryption noise per output, real units
};

// The plain model with the heads in scope of the target layers replaced by
// the compiled circuit. In disable mode nothing is replaced and the model is
// the plain one.
class HybridModel final : public model::AttentionOverride {
 public:
  // plan and evaluator may be null in disable mode.
  HybridModel(std::shared_ptr<const model::Weights> w, EncAttnConfig cfg,
              std::shared_ptr<const circuit::ExecutionPlan> plan, std::unique_ptr<SegmentEvaluator> evaluator);

  const std::vector<int>& replaced_heads(int layer) const override;
  void attend(int layer, std::size_t pos, std::span<const double> x_normed, std::span<double> out) override;

  model::Generation generate(std::span<const int> prompt, const model::GenerationConfig& g);
  model::Vec forward(std::span<const int> tokens);  // last-position logits, fresh cache

  const model::Model& plain() const { return model_; }
  const EncAttnConfig& config() const { return cfg_; }
  const circuit::ExecutionPlan* plan() const { return plan_.get(); }
  SegmentEvaluator* evaluator() { return evaluator_.get(); }
  std::uint64_t pbs_tally() const { return evaluator_ ? evaluator_->pbs_tally() : 0; }

  const std::vector<AttendRecord>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

 private:
  model::Model model_;
  EncAttnConfig cfg_;
  std::shared_ptr<const circuit::ExecutionPlan> plan_;
  std::unique_ptr<SegmentEvaluator> evaluator_;
  std::vector<int> heads_, none_;
  int first_target_ = -1;
  std::vector<AttendRecord> trace_;
};

// Per-output worst-case encryption noise of a segment, in real units.
model::Vec segment_noise(const circuit::ExecutionPlan& plan, std::size_t segment);

// Input codes of a segment for the normalised layer input h.
std::vector<std::int64_t> segment_codes(const circuit::ExecutionPlan& plan, std::size_t segment,
                                        std::span<const double> h);

}  // namespace pql3::attn
