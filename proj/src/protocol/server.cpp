#include "pql3/protocol/server.hpp"

#include <chrono>

#include "pql3/protocol/messages.hpp"

namespace pql3::protocol {

std::shared_ptr<const fhe::ServerKey> ServerRegistry::key(const Digest& d, std::span<const std::uint8_t> bytes) {
  {
    std::lock_guard lk(mu_);
    if (auto it = keys_.find(d); it != keys_.end()) return it->second;
  }
  // Parse outside the lock; a concurrent duplicate load is harmless.
  auto k = std::make_shared<const fhe::ServerKey>(fhe::ServerKey::deserialize(bytes));
  std::lock_guard lk(mu_);
  return keys_.emplace(d, std::move(k)).first->second;
}

std::shared_ptr<const circuit::ExecutionPlan> ServerRegistry::plan(const Digest& d, std::span<const std::uint8_t> bytes,
                                                                   const fhe::CryptoParams& live) {
  std::pair<Digest, Digest> k{d, live.fingerprint()};
  {
    std::lock_guard lk(mu_);
    if (auto it = plans_.find(k); it != plans_.end()) return it->second;
  }
  auto p = std::make_shared<const circuit::ExecutionPlan>(circuit::ExecutionPlan::deserialize(bytes, live));
  std::lock_guard lk(mu_);
  return plans_.emplace(k, std::move(p)).first->second;
}

std::size_t ServerRegistry::keys_loaded() const {
  std::lock_guard lk(mu_);
  return keys_.size();
}

std::size_t ServerRegistry::plans_loaded() const {
  std::lock_guard lk(mu_);
  return plans_.size();
}

ServerSession::ServerSession(std::shared_ptr<ServerRegistry> registry, unsigned threads)
    : registry_(registry ? std::move(registry) : std::make_shared<ServerRegistry>()), threads_(threads) {}

ServerSession::~ServerSession() = default;

namespace {
Bytes ack(const Digest& d) {
  ResultMsg m;
  m.kind = ResultMsg::Kind::Ack;
  m.digest = d;
  return encode_frame(MsgType::Result, m.serialize());
}
}  // namespace

Bytes ServerSession::handle(std::span<const std::uint8_t> bytes) {
  try {
    Frame f = decode_frame(bytes);
    switch (f.type) {
      case MsgType::EvalKey: return install_key(f.payload);
      case MsgType::Plan: return install_plan(f.payload);
      case MsgType::CiphertextBatch: return execute(f.payload);
      default: return encode_error("server does not accept " + to_string(f.type) + " frames");
    }
  } catch (const std::exception& e) {
    return encode_error(e.what());
  }
}

Bytes ServerSession::install_key(const Bytes& payload) {
  Digest d = sha256(payload);
  key_ = registry_->key(d, payload);
  engine_ = std::make_unique<fhe::BlindRotatePbs>(*key_);
  // A plan is bound to the key's parameters; it must be sent again.
  exec_.reset();
  plan_.reset();
  state_.plan.reset();
  state_.eval_key = d;
  return ack(d);
}

Bytes ServerSession::install_plan(const Bytes& payload) {
  if (!key_) throw ProtocolError("plan received before the evaluation key");
  Digest d = sha256(payload);
  auto plan = registry_->plan(d, payload, key_->params());
  exec_.reset();
  plan_ = std::move(plan);
  exec_ = std::make_unique<circuit::CipherExecutor>(*plan_, circuit::CipherBackend(*plan_, *engine_), threads_);
  state_.plan = d;
  return ack(d);
}

Bytes ServerSession::execute(const Bytes& payload) {
  if (!key_ || !exec_) throw ProtocolError("ciphertext batch received before evaluation key and plan");
  auto req = BatchRequest::deserialize(payload, key_->params_ptr(), key_->key_id());
  if (req.segment >= plan_->segments.size()) throw ProtocolError("segment index out of range");
  const auto& seg = plan_->segments[req.segment];
  if (req.inputs.size() != seg.inputs.size())
    throw ProtocolError("segment expects " + std::to_string(seg.inputs.size()) + " ciphertexts, got " +
                        std::to_string(req.inputs.size()));
  if (req.reset) exec_->reset();
  auto t0 = std::chrono::steady_clock::now();
  std::uint64_t before = engine_->count();
  for (std::size_t k = 0; k < req.inputs.size(); ++k) exec_->set_input(seg.inputs[k], std::move(req.inputs[k]));
  exec_->run_segment(req.segment);
  ResultMsg out;
  out.segment = req.segment;
  out.pbs = engine_->count() - before;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (auto id : seg.outputs) out.outputs.push_back(exec_->value(id));
  ++executed_;
  return encode_frame(MsgType::Result, out.serialize());
}

void serve_stream(Transport& t, ServerSession& session) {
  for (;;) {
    std::optional<Bytes> frame;
    try {
      frame = read_frame_bytes(t);
    } catch (const ProtocolError& e) {
      t.write(encode_error(e.what()));
      return;
    }
    if (!frame) return;
    t.write(session.handle(*frame));
  }
}

void LoopbackTransport::write(std::span<const std::uint8_t> bytes) {
  inbound_.insert(inbound_.end(), bytes.begin(), bytes.end());
  while (inbound_.size() >= kHeaderSize) {
    std::uint64_t len;
    try {
      len = header_payload_len(inbound_);
    } catch (const FrameDesync& e) {
      // Same outcome as a socket session: an error, then nothing more is read.
      auto err = encode_error(e.what());
      outbound_.insert(outbound_.end(), err.begin(), err.end());
      inbound_.clear();
      return;
    }
    std::size_t total = kHeaderSize + len + kTrailerSize;
    if (inbound_.size() < total) return;
    auto resp = session_.handle(std::span(inbound_).first(total));
    outbound_.insert(outbound_.end(), resp.begin(), resp.end());
    inbound_.erase(inbound_.begin(), inbound_.begin() + static_cast<std::ptrdiff_t>(total));
  }
}

bool LoopbackTransport::read_exact(std::span<std::uint8_t> out) {
  std::size_t avail = outbound_.size() - read_pos_;
  if (avail == 0 && !out.empty()) return false;
  if (avail < out.size()) throw IoError("loopback stream ended inside a frame");
  std::copy_n(outbound_.begin() + static_cast<std::ptrdiff_t>(read_pos_), out.size(), out.begin());
  read_pos_ += out.size();
  if (read_pos_ == outbound_.size()) {
    outbound_.clear();
    read_pos_ = 0;
  }
  return true;
}

SocketServer::SocketServer(std::uint16_t port, std::shared_ptr<ServerRegistry> registry, unsigned threads_per_session,
                           const std::string& host)
    : listener_(port, host),
      registry_(registry ? std::move(registry) : std::make_shared<ServerRegistry>()),
      threads_(threads_per_session),
      acceptor_([this] { loop(); }) {}

SocketServer::~SocketServer() { stop(); }

void SocketServer::loop() {
  while (!stopping_) {
    std::shared_ptr<SocketTransport> conn;
    try {
      conn = listener_.accept();
    } catch (const IoError&) {
      return;  // listener closed
    }
    std::lock_guard lk(mu_);
    if (stopping_) return;
    conns_.push_back(conn);
    ++sessions_;
    workers_.emplace_back([this, conn] {
      ServerSession s(registry_, threads_);
      try {
        serve_stream(*conn, s);
      } catch (const IoError&) {
        // Peer vanished; the session state dies with it.
      }
      conn->shutdown_both();
    });
  }
}

void SocketServer::stop() {
  if (stopping_.exchange(true)) {
    if (acceptor_.joinable()) acceptor_.join();
    return;
  }
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::lock_guard lk(mu_);
  for (auto& c : conns_) c->shutdown_both();
  for (auto& w : workers_) w.join();
  workers_.clear();
  conns_.clear();
}

void SocketServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
}

}  // namespace pql3::protocol
