#pragma once

#include <memory>
#include <vector>

#include "pql3/attn/evaluator.hpp"
#include "pql3/circuit/plan.hpp"
#include "pql3/fhe/keys.hpp"
#include "pql3/protocol/frame.hpp"
#include "pql3/protocol/server.hpp"

namespace pql3::protocol {

struct StepResult {
  std::vector<std::int64_t> codes;  // signed output integers
  std::vector<double> values;       // codes times the node's real scale
  std::uint64_t pbs = 0;            // server-reported bootstraps
  double server_seconds = 0.0;
};

// Client custody of the secret key. Talks to one server session over a
// transport; the transport must outlive the session.
class ClientSession {
 public:
  ClientSession(Transport& t, fhe::ClientKey key);

  // Sends the evaluation key and the plan; checks both acknowledgements.
  void install(const fhe::ServerKey& key, std::shared_ptr<const circuit::ExecutionPlan> plan);

  // Encrypts one segment's input codes into a CiphertextBatch frame.
  // PlanError if a code lies outside its input node's range.
  Bytes encrypt_step(std::size_t segment, const std::vector<std::int64_t>& codes, bool reset);
  // Validates the frame completely before decrypting anything.
  StepResult decrypt_result(std::span<const std::uint8_t> frame, std::size_t segment);
  StepResult round_trip(std::size_t segment, const std::vector<std::int64_t>& codes, bool reset);

  const SessionState& state() const { return state_; }
  const circuit::ExecutionPlan& plan() const { return *plan_; }
  std::uint64_t bytes_sent() const { return sent_; }
  std::uint64_t bytes_received() const { return received_; }
  std::uint64_t decrypt_calls() const { return decrypts_; }

 private:
  Frame exchange(const Bytes& frame);
  Frame expect_result(Frame f) const;

  Transport& t_;
  fhe::ClientKey key_;
  std::shared_ptr<const circuit::ExecutionPlan> plan_;
  SessionState state_;
  std::uint64_t sent_ = 0, received_ = 0, decrypts_ = 0;
};

// Segment evaluator backed by a remote server session: execute mode with the
// client and server split across a transport.
class RemoteEvaluator final : public attn::SegmentEvaluator {
 public:
  RemoteEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan, fhe::KeyMaterial keys, Transport& t);
  void reset() override { pending_reset_ = true; }
  std::vector<std::int64_t> evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) override;
  std::uint64_t pbs_tally() const override { return pbs_; }

  const ClientSession& session() const { return session_; }
  double server_seconds() const { return server_seconds_; }

 private:
  ClientSession session_;
  bool pending_reset_ = true;
  std::uint64_t pbs_ = 0;
  double server_seconds_ = 0.0;
};

}  // namespace pql3::protocol
