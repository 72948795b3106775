#include "cvc/services/client.hpp"

#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::services {

ServiceClient::ServiceClient(std::shared_ptr<Transport> transport, std::map<ServiceKind, std::string> endpoints,
                             std::shared_ptr<ResponseCache> cache, RetryPolicy retry, Sleeper sleeper)
    : transport_(std::move(transport)),
      endpoints_(std::move(endpoints)),
      cache_(std::move(cache)),
      retry_(retry),
      sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

nlohmann::json ServiceClient::dispatch(const ServiceRequest& request) {
  validate_request(request.kind, request.payload);
  const bool use_cache = request.cacheable && cache_;
  CacheKey key;
  if (use_cache) {
    key = cache_key(request);
    if (auto hit = cache_->get(request.kind, key)) {
      ++cache_hits_;
      return *hit;
    }
  }

  const auto it = endpoints_.find(request.kind);
  const std::string base_url = it == endpoints_.end() ? std::string() : it->second;
  const std::string path(endpoint_path(request.kind));
  const std::string body = canonical_dump(request.payload);

  std::string last_error;
  double backoff = retry_.backoff_ms;
  for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
    ++network_calls_;
    const auto reply = transport_->post(base_url, path, body);
    if (reply.status >= 200 && reply.status < 300) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(reply.body);
      } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError(path + " response: body is not valid JSON");
      }
      validate_response(request.kind, parsed);
      if (use_cache) cache_->put(request.kind, key, parsed);
      return parsed;
    }
    if (reply.status >= 400 && reply.status < 500) {
      throw RequestError(reply.status, path + " rejected the request (HTTP " + std::to_string(reply.status) +
                                           "): " + reply.body);
    }
    last_error = reply.status == 0 ? reply.body : "HTTP " + std::to_string(reply.status);
    if (attempt < retry_.attempts) {
      spdlog::debug("{} attempt {} failed ({}); retrying", path, attempt, last_error);
      sleeper_(std::chrono::milliseconds(static_cast<long long>(backoff)));
      backoff *= retry_.growth;
    }
  }
  throw ServiceUnavailable(path + " unavailable after " + std::to_string(retry_.attempts) +
                           " attempts: " + last_error);
}

std::vector<std::string> text_generate(ServiceClient& client, const std::string& prompt,
                                       const SamplingParams& params, int n, std::uint64_t seed) {
  const auto body = client.dispatch(text_generate_request(prompt, params, n, seed));
  return body.at("completions").get<std::vector<std::string>>();
}

std::vector<std::string> vl_generate(ServiceClient& client, std::span<const std::uint8_t> png,
                                     const std::string& prompt, const SamplingParams& params, int n,
                                     std::uint64_t seed) {
  const auto body = client.dispatch(vl_generate_request(png, prompt, params, n, seed));
  return body.at("completions").get<std::vector<std::string>>();
}

MlmScore mlm_score(ServiceClient& client, const std::string& context, const std::string& target) {
  const auto body = client.dispatch(mlm_score_request(context, target));
  return {body.at("log_probs").get<std::vector<double>>(), body.at("score").get<double>()};
}

std::vector<ScoredBox> ground(ServiceClient& client, std::span<const std::uint8_t> png, const std::string& phrase) {
  const auto body = client.dispatch(ground_request(png, phrase));
  std::vector<ScoredBox> out;
  for (const auto& b : body.at("boxes")) {
    // Pixel coordinates may arrive as reals; round outward to whole pixels.
    Box box{static_cast<int>(std::floor(b.at("x0").get<double>())), static_cast<int>(std::floor(b.at("y0").get<double>())),
            static_cast<int>(std::ceil(b.at("x1").get<double>())), static_cast<int>(std::ceil(b.at("y1").get<double>()))};
    out.push_back({box, b.at("score").get<double>()});
  }
  return out;
}

Bitmap segment(ServiceClient& client, std::span<const std::uint8_t> png, const Box& box) {
  const auto body = client.dispatch(segment_request(png, box));
  const auto bytes = base64_decode(body.at("mask_png_b64").get<std::string>());
  try {
    return decode_mask_png(bytes);
  } catch (const Error& e) {
    throw ProtocolError(std::string("/v1/segment response: field 'mask_png_b64' is not a PNG: ") + e.what());
  }
}

std::vector<std::vector<double>> embed(ServiceClient& client, const std::vector<std::string>& texts) {
  const auto body = client.dispatch(embed_request(texts));
  auto vectors = body.at("vectors").get<std::vector<std::vector<double>>>();
  if (vectors.size() != texts.size()) {
    throw ProtocolError("/v1/embed response: field 'vectors' has " + std::to_string(vectors.size()) +
                        " entries for " + std::to_string(texts.size()) + " texts");
  }
  return vectors;
}

}  // namespace cvc::services
