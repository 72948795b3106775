#pragma once

#include <memory>
#include <string>
#include <thread>

#include "cvc/services/mocks.hpp"

namespace httplib {
class Server;
}

namespace cvc::services {

/// Serves MockServices over HTTP on the wire protocol. Used by the CLI's
/// serve-mock command and by the HTTP client tests.
class MockHttpServer {
public:
  explicit MockHttpServer(std::shared_ptr<const MockServices> services);
  ~MockHttpServer();
  MockHttpServer(const MockHttpServer&) = delete;
  MockHttpServer& operator=(const MockHttpServer&) = delete;

  /// Binds and serves in a background thread; port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

private:
  std::shared_ptr<const MockServices> services_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace cvc::services
