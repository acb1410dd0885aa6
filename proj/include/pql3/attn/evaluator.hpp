#pragma once

#include <memory>

#include "pql3/circuit/executor.hpp"
#include "pql3/fhe/keys.hpp"

namespace pql3::attn {

// Runs one compiled segment on integer input codes and returns the signed
// integer outputs. Implementations differ only in where and how the circuit
// runs; for a fixed plan they must agree exactly.
class SegmentEvaluator {
 public:
  virtual ~SegmentEvaluator() = default;
  // Forget all state of the previous sequence (cached keys and values).
  virtual void reset() = 0;
  // codes: one per segment input, in segment order.
  virtual std::vector<std::int64_t> evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) = 0;
  // Bootstraps performed (or simulated) since construction.
  virtual std::uint64_t pbs_tally() const = 0;
};

// Clear evaluation of the integer circuit.
class SimulateEvaluator final : public SegmentEvaluator {
 public:
  explicit SimulateEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan);
  void reset() override;
  std::vector<std::int64_t> evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) override;
  std::uint64_t pbs_tally() const override { return done_ + exec_.pbs_sites(); }
  // Signed value of any evaluated node (for error bounds and traces).
  std::int64_t value(circuit::NodeId id) const;

 private:
  std::shared_ptr<const circuit::ExecutionPlan> plan_;
  circuit::ClearExecutor exec_;
  std::uint64_t done_ = 0;
};

// Client and server in one process: encrypt, evaluate homomorphically,
// decrypt. The ciphertext store lives in the executor.
class LocalExecuteEvaluator final : public SegmentEvaluator {
 public:
  LocalExecuteEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan, fhe::KeyMaterial keys,
                        unsigned threads = 1);
  void reset() override;
  std::vector<std::int64_t> evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) override;
  std::uint64_t pbs_tally() const override { return engine_.count(); }

 private:
  std::shared_ptr<const circuit::ExecutionPlan> plan_;
  fhe::KeyMaterial keys_;
  fhe::BlindRotatePbs engine_;
  circuit::CipherExecutor exec_;
};

}  // namespace pql3::attn
