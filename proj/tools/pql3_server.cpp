// Standalone server role. Links the server protocol library only, so no
// secret-key code can be reached from here (checked by a symbol test).
#include <CLI11.hpp>

#include <iostream>

#include "pql3/protocol/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Encrypted attention server: executes compiled plans on ciphertexts"};
  std::uint16_t port = 7300;
  std::string host = "127.0.0.1";
  unsigned threads = 1;
  app.add_option("--port", port, "TCP port (0 picks a free one)");
  app.add_option("--host", host, "IPv4 address to bind");
  app.add_option("--threads", threads, "Worker threads per session")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  try {
    pql3::protocol::SocketServer server(port, std::make_shared<pql3::protocol::ServerRegistry>(), threads, host);
    std::cout << "listening on " << host << ":" << server.port() << std::endl;
    server.wait();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
