#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "pql3/protocol/frame.hpp"

namespace pql3::protocol {

// Blocking TCP stream. Owns the descriptor.
class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(int fd) : fd_(fd) {}
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void write(std::span<const std::uint8_t> bytes) override;
  bool read_exact(std::span<std::uint8_t> out) override;
  // Half-closes the sending side so the peer sees end of stream.
  void shutdown_write();
  // Unblocks any reader or writer; later operations fail.
  void shutdown_both();

 private:
  int fd_;
};

class TcpListener {
 public:
  // Port 0 picks a free port; see port().
  explicit TcpListener(std::uint16_t port, const std::string& host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<SocketTransport> accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// addr is "host:port".
std::unique_ptr<SocketTransport> connect_tcp(const std::string& addr);

}  // namespace pql3::protocol
