#include "cvc/services/transport.hpp"

#include <httplib.h>

namespace cvc::services {

HttpReply HttpTransport::post(const std::string& base_url, const std::string& path, const std::string& body) {
  httplib::Client client(base_url);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  auto res = client.Post(path, body, "application/json");
  if (!res) return {0, "transport error: " + httplib::to_string(res.error())};
  return {res->status, res->body};
}

}  // namespace cvc::services
