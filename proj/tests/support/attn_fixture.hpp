#pragma once

#include <fstream>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pql3/attn/calibration.hpp"
#include "pql3/attn/compile.hpp"
#include "pql3/attn/evaluator.hpp"
#include "pql3/attn/hybrid.hpp"
#include "pql3/attn/reference.hpp"
#include "pql3/common/error.hpp"
#include "pql3/model/generate.hpp"
#include "pql3/model/layers.hpp"

#include "check_result.hpp"

namespace pql3::checks {

inline std::vector<std::string> prompt_lines() {
  std::ifstream in(PQL3_DATA_DIR "/prompts.txt");
  if (!in) throw IoError("cannot open " PQL3_DATA_DIR "/prompts.txt");
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

// First `n` tokens of every prompt.
inline std::vector<std::vector<int>> prompt_tokens(std::size_t n) {
  std::vector<std::vector<int>> out;
  for (const auto& line : prompt_lines()) {
    auto t = model::encode_text(line);
    t.resize(std::min(t.size(), n));
    out.push_back(t);
  }
  return out;
}

// Toy model, calibration over the prompt corpus and the default circuit
// settings for the given scope.
struct AttnFixture {
  std::shared_ptr<const model::Weights> weights;
  attn::EncAttnConfig cfg;
  attn::CalibrationRecord record;

  explicit AttnFixture(attn::HeadScope scope = attn::HeadScope::Single, std::vector<int> layers = {0},
                       std::size_t calib_len = 6) {
    model::ModelConfig mc;
    weights = std::make_shared<const model::Weights>(model::Weights::random(mc));
    cfg.scope = scope;
    cfg.target_layers = std::move(layers);
    record = attn::calibrate_block(prompt_tokens(calib_len), *weights, cfg);
  }

  std::shared_ptr<const circuit::ExecutionPlan> plan(std::uint32_t seq_len) const {
    return attn::compile_attention(cfg, *weights, record, seq_len);
  }

  attn::HybridModel simulate(std::shared_ptr<const circuit::ExecutionPlan> p) const {
    auto c = cfg;
    c.mode = attn::FheMode::Simulate;
    return attn::HybridModel(weights, c, p, std::make_unique<attn::SimulateEvaluator>(p));
  }

  attn::HybridModel execute(std::shared_ptr<const circuit::ExecutionPlan> p, const fhe::KeyMaterial& km) const {
    auto c = cfg;
    c.mode = attn::FheMode::Execute;
    return attn::HybridModel(weights, c, p, std::make_unique<attn::LocalExecuteEvaluator>(p, km));
  }
};

// Every node of every segment of the first target layer, over `trials`
// sequences of random normalised activations: the clear circuit value must
// lie within the plan's propagated bound of the floating-point reference.
// Nodes without a real counterpart are skipped.
inline CheckResult quantization_bound(const AttnFixture& f, const circuit::ExecutionPlan& plan, int trials,
                                      std::uint64_t seed) {
  CheckResult r;
  auto shared = std::make_shared<const circuit::ExecutionPlan>(plan);
  attn::SimulateEvaluator ev(shared);
  attn::BlockReference ref(*f.weights, f.cfg);
  attn::BoundTracker bt(*shared);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  int layer = f.cfg.target_layers.at(0);
  const auto& mc = f.weights->config;
  std::uint64_t activations = 0;
  for (int trial = 0; trial < trials; ++trial) {
    ev.reset();
    ref.reset();
    bt.reset();
    for (std::uint32_t pos = 0; pos < plan.seq_len; ++pos) {
      model::Vec raw(static_cast<std::size_t>(mc.d_emb));
      for (auto& x : raw) x = nd(rng);
      auto h = model::rms_norm(raw, f.weights->layers[static_cast<std::size_t>(layer)].rms_gain_attn);
      auto seg = plan.segment_index(layer, static_cast<int>(pos));
      ev.evaluate(seg, attn::segment_codes(plan, seg, h));
      ref.step(layer, pos, h);
      bt.update(seg, [&](circuit::NodeId id) { return ev.value(id); }, h);
      ++activations;
      for (auto id = plan.segments[seg].begin; id < plan.segments[seg].end; ++id) {
        double want = ref.value(plan.nodes[id].tag), b = bt.bound(id);
        if (std::isnan(want) || std::isnan(b)) continue;
        double got = bt.real(id, ev.value(id));
        // Slack for floating-point rounding in the reference itself.
        r.expect(std::abs(want - got) <= b + 1e-9 * (1 + std::abs(want)),
                 "node " + std::to_string(id) + " pos " + std::to_string(pos) + ": |" + std::to_string(want) + " - " +
                     std::to_string(got) + "| > " + std::to_string(b));
      }
    }
  }
  r.note = std::to_string(activations) + " activations";
  return r;
}

}  // namespace pql3::checks
