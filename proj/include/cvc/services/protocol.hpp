#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"

namespace cvc::services {

using nlohmann::json;

inline constexpr std::string_view kMaskPlaceholder = "<MASK_SPAN>";

struct ServiceRequest {
  ServiceKind kind = ServiceKind::text_generate;
  json payload;
  bool cacheable = true;
};

/// Fixed-length lowercase hex SHA-256.
struct CacheKey {
  std::string digest;
  bool operator==(const CacheKey&) const = default;
  auto operator<=>(const CacheKey&) const = default;
};

/// POST path of a service kind, e.g. "/v1/mlm/score".
std::string_view endpoint_path(ServiceKind kind);
ServiceKind kind_from_path(std::string_view path);

/// Throws ProtocolError naming the first offending field.
void validate_request(ServiceKind kind, const json& payload);
void validate_response(ServiceKind kind, const json& body);

/// Sorted keys, integral floats folded to integers, image payloads replaced by
/// their content digest.
json canonicalize_payload(const json& payload);
CacheKey cache_key(const ServiceRequest& request);

ServiceRequest text_generate_request(const std::string& prompt, const SamplingParams& params, int n,
                                     std::uint64_t seed);
ServiceRequest vl_generate_request(std::span<const std::uint8_t> png, const std::string& prompt,
                                   const SamplingParams& params, int n, std::uint64_t seed);
ServiceRequest mlm_score_request(const std::string& context, const std::string& target);
ServiceRequest ground_request(std::span<const std::uint8_t> png, const std::string& phrase);
ServiceRequest segment_request(std::span<const std::uint8_t> png, const Box& box);
ServiceRequest embed_request(const std::vector<std::string>& texts);

}  // namespace cvc::services
