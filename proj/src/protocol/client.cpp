#include "pql3/protocol/client.hpp"

#include "pql3/protocol/messages.hpp"

namespace pql3::protocol {

ClientSession::ClientSession(Transport& t, fhe::ClientKey key) : t_(t), key_(std::move(key)) {
  state_.role = Role::Client;
}

Frame ClientSession::exchange(const Bytes& frame) {
  t_.write(frame);
  sent_ += frame.size();
  auto raw = read_frame_bytes(t_);
  if (!raw) throw IoError("server closed the connection");
  received_ += raw->size();
  return decode_frame(*raw);
}

Frame ClientSession::expect_result(Frame f) const {
  if (f.type == MsgType::Error) throw ProtocolError("server error: " + ErrorMsg::deserialize(f.payload).message);
  if (f.type != MsgType::Result) throw ProtocolError("expected a Result frame, got " + to_string(f.type));
  return f;
}

void ClientSession::install(const fhe::ServerKey& key, std::shared_ptr<const circuit::ExecutionPlan> plan) {
  if (key.key_id() != key_.key_id()) throw KeyError("evaluation key does not belong to this client key");
  if (!plan->params.same_scheme(key_.params())) throw PlanError("plan parameters do not match the client key");
  auto params = key_.params_ptr();
  auto check_ack = [&](const Frame& f, const Bytes& sent) {
    auto m = ResultMsg::deserialize(expect_result(f).payload, params, key_.key_id());
    if (m.kind != ResultMsg::Kind::Ack || m.digest != sha256(sent)) throw ProtocolError("server acknowledged other bytes");
    return m.digest;
  };
  Bytes kb = key.serialize();
  state_.eval_key = check_ack(exchange(encode_frame(MsgType::EvalKey, kb)), kb);
  Bytes pb = plan->serialize();
  state_.plan = check_ack(exchange(encode_frame(MsgType::Plan, pb)), pb);
  plan_ = std::move(plan);
}

Bytes ClientSession::encrypt_step(std::size_t segment, const std::vector<std::int64_t>& codes, bool reset) {
  if (!plan_) throw ProtocolError("no plan installed");
  if (segment >= plan_->segments.size()) throw PlanError("segment index out of range");
  const auto& s = plan_->segments[segment];
  if (codes.size() != s.inputs.size())
    throw ShapeError("segment expects " + std::to_string(s.inputs.size()) + " codes, got " + std::to_string(codes.size()));
  const auto& p = plan_->params;
  BatchRequest req;
  req.segment = segment;
  req.reset = reset;
  for (std::size_t k = 0; k < codes.size(); ++k) {
    const auto& n = plan_->nodes[s.inputs[k]];
    if (codes[k] < n.lo || codes[k] > n.hi)
      throw PlanError("input code " + std::to_string(codes[k]) + " outside the quantized range [" +
                      std::to_string(n.lo) + ", " + std::to_string(n.hi) + "]");
    req.inputs.push_back(key_.encrypt(circuit::encode_residue(codes[k], p), p.total_bits()));
  }
  return encode_frame(MsgType::CiphertextBatch, req.serialize());
}

StepResult ClientSession::decrypt_result(std::span<const std::uint8_t> frame, std::size_t segment) {
  if (!plan_) throw ProtocolError("no plan installed");
  auto f = expect_result(decode_frame(frame));
  auto m = ResultMsg::deserialize(f.payload, key_.params_ptr(), key_.key_id());
  const auto& s = plan_->segments.at(segment);
  if (m.kind != ResultMsg::Kind::Outputs || m.segment != segment) throw ProtocolError("result is for another request");
  if (m.outputs.size() != s.outputs.size()) throw ProtocolError("result carries the wrong number of ciphertexts");
  StepResult r;
  r.pbs = m.pbs;
  r.server_seconds = m.wall_seconds;
  for (std::size_t k = 0; k < m.outputs.size(); ++k) {
    const auto& n = plan_->nodes[s.outputs[k]];
    ++decrypts_;
    auto v = circuit::decode_signed(key_.decrypt(m.outputs[k]), n, plan_->params);
    r.codes.push_back(v);
    r.values.push_back(static_cast<double>(v) * n.real_scale);
  }
  return r;
}

StepResult ClientSession::round_trip(std::size_t segment, const std::vector<std::int64_t>& codes, bool reset) {
  auto req = encrypt_step(segment, codes, reset);
  t_.write(req);
  sent_ += req.size();
  auto raw = read_frame_bytes(t_);
  if (!raw) throw IoError("server closed the connection");
  received_ += raw->size();
  return decrypt_result(*raw, segment);
}

RemoteEvaluator::RemoteEvaluator(std::shared_ptr<const circuit::ExecutionPlan> plan, fhe::KeyMaterial keys, Transport& t)
    : session_(t, std::move(keys.client)) {
  session_.install(keys.server, std::move(plan));
}

std::vector<std::int64_t> RemoteEvaluator::evaluate(std::size_t segment, const std::vector<std::int64_t>& codes) {
  auto r = session_.round_trip(segment, codes, pending_reset_);
  pending_reset_ = false;
  pbs_ += r.pbs;
  server_seconds_ += r.server_seconds;
  return r.codes;
}

}  // namespace pql3::protocol
