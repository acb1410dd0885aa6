#include "pql3/protocol/socket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace pql3::protocol {

namespace {
[[noreturn]] void sys_fail(const std::string& what) { throw IoError(what + ": " + std::strerror(errno)); }
}  // namespace

SocketTransport::~SocketTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void SocketTransport::write(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    auto n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    off += static_cast<std::size_t>(n);
  }
}

bool SocketTransport::read_exact(std::span<std::uint8_t> out) {
  std::size_t off = 0;
  while (off < out.size()) {
    auto n = ::recv(fd_, out.data() + off, out.size() - off, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      sys_fail("recv");
    }
    if (n == 0) {
      if (off == 0) return false;
      throw IoError("connection closed inside a frame");
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void SocketTransport::shutdown_write() { ::shutdown(fd_, SHUT_WR); }
void SocketTransport::shutdown_both() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) throw ConfigError("not an IPv4 address: " + host);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) sys_fail("bind " + host + ":" + std::to_string(port));
  if (::listen(fd_, 16) < 0) sys_fail("listen");
  socklen_t len = sizeof sa;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<SocketTransport> TcpListener::accept() {
  for (;;) {
    int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) {
      int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return std::make_unique<SocketTransport>(c);
    }
    if (errno == EINTR) continue;
    sys_fail("accept");
  }
}

std::unique_ptr<SocketTransport> connect_tcp(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address must be host:port, got " + addr);
  std::string host = addr.substr(0, colon), port = addr.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw IoError("cannot resolve " + addr + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (auto* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) sys_fail("connect " + addr);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<SocketTransport>(fd);
}

}  // namespace pql3::protocol
