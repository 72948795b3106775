#include "cvc/services/mock_server.hpp"

#include <httplib.h>

#include "cvc/core/errors.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::services {

MockHttpServer::MockHttpServer(std::shared_ptr<const MockServices> services)
    : services_(std::move(services)), server_(std::make_unique<httplib::Server>()) {
  for (auto kind : kAllServiceKinds) {
    server_->Post(std::string(endpoint_path(kind)), [this, kind](const httplib::Request& req, httplib::Response& res) {
      nlohmann::json payload;
      try {
        payload = nlohmann::json::parse(req.body);
      } catch (const nlohmann::json::parse_error& e) {
        res.status = 400;
        res.set_content(std::string("malformed JSON: ") + e.what(), "text/plain");
        return;
      }
      try {
        res.set_content(canonical_dump(services_->handle(kind, payload)), "application/json");
      } catch (const RequestError& e) {
        res.status = e.status();
        res.set_content(e.what(), "text/plain");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(e.what(), "text/plain");
      }
    });
  }
}

MockHttpServer::~MockHttpServer() { stop(); }

int MockHttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind mock server to " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void MockHttpServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void MockHttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cvc::services
