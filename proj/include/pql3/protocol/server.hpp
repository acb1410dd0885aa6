#pragma once

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "pql3/circuit/executor.hpp"
#include "pql3/fhe/keys.hpp"
#include "pql3/fhe/pbs.hpp"
#include "pql3/protocol/frame.hpp"
#include "pql3/protocol/socket.hpp"

namespace pql3::protocol {

using Digest = std::array<std::uint8_t, 32>;

enum class Role : std::uint8_t { Client, Server };

struct SessionState {
  Role role = Role::Server;
  std::uint32_t version = kProtocolVersion;
  std::optional<Digest> eval_key;  // SHA-256 of the installed key bytes
  std::optional<Digest> plan;      // SHA-256 of the installed plan bytes
};

// Immutable evaluation keys and plans shared by all sessions of a server,
// keyed by the digest of their serialized bytes.
class ServerRegistry {
 public:
  std::shared_ptr<const fhe::ServerKey> key(const Digest& d, std::span<const std::uint8_t> bytes);
  std::shared_ptr<const circuit::ExecutionPlan> plan(const Digest& d, std::span<const std::uint8_t> bytes,
                                                     const fhe::CryptoParams& live);
  std::size_t keys_loaded() const;
  std::size_t plans_loaded() const;

 private:
  mutable std::mutex mu_;
  std::map<Digest, std::shared_ptr<const fhe::ServerKey>> keys_;
  std::map<std::pair<Digest, Digest>, std::shared_ptr<const circuit::ExecutionPlan>> plans_;
};

// One ordered request/response stream. Sees evaluation keys and ciphertexts
// only; the encrypted key/value state of earlier positions is session-local.
class ServerSession {
 public:
  explicit ServerSession(std::shared_ptr<ServerRegistry> registry = nullptr, unsigned threads = 1);
  ~ServerSession();

  // Decodes one raw frame and returns the encoded response. Never throws:
  // every failure becomes an Error frame.
  Bytes handle(std::span<const std::uint8_t> frame);

  const SessionState& state() const { return state_; }
  std::uint64_t pbs_executed() const { return engine_ ? engine_->count() : 0; }
  std::uint64_t requests_executed() const { return executed_; }

 private:
  Bytes install_key(const Bytes& payload);
  Bytes install_plan(const Bytes& payload);
  Bytes execute(const Bytes& payload);

  std::shared_ptr<ServerRegistry> registry_;
  unsigned threads_;
  SessionState state_;
  std::shared_ptr<const fhe::ServerKey> key_;
  std::shared_ptr<const circuit::ExecutionPlan> plan_;
  std::unique_ptr<fhe::BlindRotatePbs> engine_;
  std::unique_ptr<circuit::CipherExecutor> exec_;
  std::uint64_t executed_ = 0;
};

// Serves frames from a stream until it ends. A header that cannot be trusted
// is answered with an Error frame and ends the session.
void serve_stream(Transport& t, ServerSession& session);

// In-process transport: each complete frame written is handed to the session
// synchronously and the response queued for reading.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(ServerSession& session) : session_(session) {}
  void write(std::span<const std::uint8_t> bytes) override;
  bool read_exact(std::span<std::uint8_t> out) override;

 private:
  ServerSession& session_;
  Bytes inbound_, outbound_;
  std::size_t read_pos_ = 0;
};

// Accept loop with one thread per connection.
class SocketServer {
 public:
  SocketServer(std::uint16_t port, std::shared_ptr<ServerRegistry> registry, unsigned threads_per_session = 1,
               const std::string& host = "127.0.0.1");
  ~SocketServer();
  std::uint16_t port() const { return listener_.port(); }
  void stop();
  // Blocks while the accept loop runs (for the CLI); not for use with stop().
  void wait();
  std::size_t sessions_served() const { return sessions_.load(); }

 private:
  void loop();
  TcpListener listener_;
  std::shared_ptr<ServerRegistry> registry_;
  unsigned threads_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> sessions_{0};
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<SocketTransport>> conns_;
  std::thread acceptor_;
};

}  // namespace pql3::protocol
