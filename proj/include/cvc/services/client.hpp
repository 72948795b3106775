#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/config.hpp"
#include "cvc/image/image.hpp"
#include "cvc/services/cache.hpp"
#include "cvc/services/protocol.hpp"
#include "cvc/services/transport.hpp"

namespace cvc::services {

/// Sends requests to the configured endpoints through a transport, with
/// response caching and retry on transport failures and 5xx replies.
class ServiceClient {
public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  ServiceClient(std::shared_ptr<Transport> transport, std::map<ServiceKind, std::string> endpoints,
                std::shared_ptr<ResponseCache> cache, RetryPolicy retry, Sleeper sleeper = {});

  /// Cache hit: stored body, no transport call. Miss: call, validate, store.
  /// Throws ServiceUnavailable, RequestError (4xx) or ProtocolError.
  nlohmann::json dispatch(const ServiceRequest& request);

  std::size_t network_calls() const noexcept { return network_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
  std::shared_ptr<Transport> transport_;
  std::map<ServiceKind, std::string> endpoints_;
  std::shared_ptr<ResponseCache> cache_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

struct MlmScore {
  std::vector<double> log_probs;
  double score = 0.0;
};

struct ScoredBox {
  Box box;
  double score = 0.0;
};

// Typed wrappers over dispatch().
std::vector<std::string> text_generate(ServiceClient& client, const std::string& prompt,
                                       const SamplingParams& params, int n, std::uint64_t seed);
std::vector<std::string> vl_generate(ServiceClient& client, std::span<const std::uint8_t> png,
                                     const std::string& prompt, const SamplingParams& params, int n,
                                     std::uint64_t seed);
MlmScore mlm_score(ServiceClient& client, const std::string& context, const std::string& target);
std::vector<ScoredBox> ground(ServiceClient& client, std::span<const std::uint8_t> png, const std::string& phrase);
Bitmap segment(ServiceClient& client, std::span<const std::uint8_t> png, const Box& box);
std::vector<std::vector<double>> embed(ServiceClient& client, const std::vector<std::string>& texts);

}  // namespace cvc::services
