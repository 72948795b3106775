#pragma once

#include <string>

namespace cvc::services {

/// Raw HTTP exchange. status 0 means the request never got a reply
/// (connection refused, timeout); `body` then carries the transport error.
struct HttpReply {
  int status = 0;
  std::string body;
};

class Transport {
public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& base_url, const std::string& path, const std::string& body) = 0;
};

/// POSTs JSON over plain HTTP. Safe to call from many threads.
class HttpTransport final : public Transport {
public:
  explicit HttpTransport(int timeout_seconds = 120) : timeout_seconds_(timeout_seconds) {}
  HttpReply post(const std::string& base_url, const std::string& path, const std::string& body) override;

private:
  int timeout_seconds_;
};

}  // namespace cvc::services
