#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "cvc/core/config.hpp"
#include "cvc/core/serialize.hpp"
#include "cvc/services/client.hpp"
#include "cvc/services/mocks.hpp"

namespace cvc::test {

inline std::filesystem::path fixtures_dir() { return CVC_FIXTURES_DIR; }
inline std::filesystem::path assets_dir() { return CVC_ASSETS_DIR; }

inline nlohmann::json load_fixture(const std::string& name) {
  return nlohmann::json::parse(read_text_file(fixtures_dir() / name));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cvc-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
  std::filesystem::path path_;
};

/// Mock-backed client that records backoff sleeps instead of sleeping.
struct MockRig {
  std::shared_ptr<services::MockTransport> transport;
  std::shared_ptr<services::ServiceClient> client;
  std::vector<std::chrono::milliseconds> sleeps;

  explicit MockRig(services::MockScript script = {}, RetryPolicy retry = {}) {
    transport = std::make_shared<services::MockTransport>(
        std::make_shared<const services::MockServices>(std::move(script)));
    std::map<ServiceKind, std::string> endpoints;
    for (auto kind : kAllServiceKinds) endpoints[kind] = "mock://local";
    client = std::make_shared<services::ServiceClient>(transport, endpoints,
                                                       std::make_shared<services::ResponseCache>(), retry,
                                                       [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
  }
};

}  // namespace cvc::test
