#include "pql3/attn/evaluator.hpp"

#include "pql3/common/error.hpp"

namespace pql3::attn {

namespace {
void check_codes(const circuit::Segment& s, const std::vector<std::int64_t>& codes) {
  if (codes.size() != s.inputs.size())
    throw ShapeError("segment expects " + std::to_string(s.inputs.size()) + " input codes, got " +
                     std::to_string(codes.size()));
}
}  // namespace

SimulateEvaluator::SimulateEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan)
    : plan_(std::move(plan)), exec_(*plan_, circuit::ClearBackend(*plan_)) {}

void SimulateEvaluator::reset() {
  done_ += exec_.pbs_sites();
  exec_.reset();
}

std::vector<std::int64_t> SimulateEvaluator::evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) {
  const auto& s = plan_->segments.at(segment);
  check_codes(s, codes);
  for (std::size_t k = 0; k < codes.size(); ++k)
    exec_.set_input(s.inputs[k], circuit::encode_residue(codes[k], plan_->params));
  exec_.run_segment(segment);
  std::vector<std::int64_t> out;
  for (auto id : s.outputs) out.push_back(value(id));
  return out;
}

std::int64_t SimulateEvaluator::value(circuit::NodeId id) const {
  return circuit::decode_signed(exec_.value(id), plan_->nodes[id], plan_->params);
}

LocalExecuteEvaluator::LocalExecuteEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan,
                                             fhe::KeyMaterial keys, unsigned threads)
    : plan_(std::move(plan)),
      keys_(std::move(keys)),
      engine_(keys_.server),
      exec_(*plan_, circuit::CipherBackend(*plan_, engine_), threads) {
  if (!keys_.client.params().same_scheme(plan_->params)) throw PlanError("keys do not match the plan's parameters");
}

void LocalExecuteEvaluator::reset() { exec_.reset(); }

std::vector<std::int64_t> LocalExecuteEvaluator::evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) {
  const auto& s = plan_->segments.at(segment);
  check_codes(s, codes);
  const auto& p = plan_->params;
  for (std::size_t k = 0; k < codes.size(); ++k)
    exec_.set_input(s.inputs[k], keys_.client.encrypt(circuit::encode_residue(codes[k], p), p.total_bits()));
  exec_.run_segment(segment);
  std::vector<std::int64_t> out;
  for (auto id : s.outputs) out.push_back(circuit::decode_signed(keys_.client.decrypt(exec_.value(id)), plan_->nodes[id], p));
  return out;
}

}  // namespace pql3::attn
