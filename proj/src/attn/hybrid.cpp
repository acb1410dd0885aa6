#include "pql3/attn/hybrid.hpp"

#include <algorithm>

#include "pql3/common/error.hpp"

namespace pql3::attn {

HybridModel::HybridModel(std::shared_ptr<const model::Weights> w, EncAttnConfig cfg,
                         std::shared_ptr<const circuit::ExecutionPlan> plan,
                         std::unique_ptr<SegmentEvaluator> evaluator)
    : model_(w), cfg_(std::move(cfg)), plan_(std::move(plan)), evaluator_(std::move(evaluator)) {
  cfg_.validate(w->config);
  if (cfg_.mode != FheMode::Disable) {
    if (!plan_ || !evaluator_) throw ConfigError(std::string(to_string(cfg_.mode)) + " mode needs a plan and an evaluator");
    if (!cfg_.target_layers.empty()) {
      heads_ = cfg_.heads(w->config);
      first_target_ = *std::min_element(cfg_.target_layers.begin(), cfg_.target_layers.end());
    }
  }
}

const std::vector<int>& HybridModel::replaced_heads(int layer) const {
  return first_target_ >= 0 && cfg_.targets(layer) ? heads_ : none_;
}

void HybridModel::attend(int layer, std::size_t pos, std::span<const double> h, std::span<double> out) {
  if (first_target_ < 0 || !cfg_.targets(layer)) return;
  if (pos == 0 && layer == first_target_) evaluator_->reset();
  std::size_t seg = plan_->segment_index(layer, static_cast<int>(pos));
  AttendRecord rec;
  rec.layer = layer;
  rec.pos = pos;
  rec.input.assign(h.begin(), h.end());
  rec.codes = segment_codes(*plan_, seg, h);
  rec.outputs = evaluator_->evaluate(seg, rec.codes);
  const auto& s = plan_->segments[seg];
  rec.contribution.assign(out.size(), 0.0);
  for (std::size_t k = 0; k < s.outputs.size(); ++k) {
    const auto& n = plan_->nodes[s.outputs[k]];
    auto r = static_cast<std::size_t>(n.tag.index);
    rec.contribution.at(r) += static_cast<double>(rec.outputs[k]) * n.real_scale;
  }
  for (std::size_t r = 0; r < out.size(); ++r) out[r] += rec.contribution[r];
  rec.noise = segment_noise(*plan_, seg);
  trace_.push_back(std::move(rec));
}

model::Generation HybridModel::generate(std::span<const int> prompt, const model::GenerationConfig& g) {
  return model::generate(model_, prompt, g, this);
}

model::Vec HybridModel::forward(std::span<const int> tokens) {
  model::KvCache cache(model_.config().n_layers);
  return model_.forward_step(tokens, cache, this);
}

model::Vec segment_noise(const circuit::ExecutionPlan& plan, std::size_t segment) {
  const auto& s = plan.segments.at(segment);
  const double delta = static_cast<double>(plan.params.delta());
  model::Vec noise;
  for (auto id : s.outputs) {
    const auto& n = plan.nodes[id];
    noise.push_back(n.noise / delta * std::abs(n.real_scale));
  }
  return noise;
}

std::vector<std::int64_t> segment_codes(const circuit::ExecutionPlan& plan, std::size_t segment,
                                        std::span<const double> h) {
  const auto& s = plan.segments.at(segment);
  std::vector<std::int64_t> codes;
  codes.reserve(s.inputs.size());
  for (auto id : s.inputs) {
    const auto& n = plan.nodes[id];
    if (n.qparams < 0) throw PlanError("segment input has no quantization parameters");
    codes.push_back(plan.qparams[static_cast<std::size_t>(n.qparams)].quantize(h[static_cast<std::size_t>(n.tag.index)]));
  }
  return codes;
}

}  // namespace pql3::attn
