#include "cvc/services/protocol.hpp"

#include <cmath>
#include <limits>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::services {

namespace {

const json& field(const json& obj, const char* name, std::string_view where) {
  if (!obj.is_object() || !obj.contains(name)) {
    throw ProtocolError(std::string(where) + ": missing required field '" + name + "'");
  }
  return obj.at(name);
}

void require_string(const json& obj, const char* name, std::string_view where) {
  if (!field(obj, name, where).is_string()) {
    throw ProtocolError(std::string(where) + ": field '" + name + "' must be a string");
  }
}

void require_number(const json& obj, const char* name, std::string_view where) {
  if (!field(obj, name, where).is_number()) {
    throw ProtocolError(std::string(where) + ": field '" + name + "' must be a number");
  }
}

void require_integer(const json& obj, const char* name, std::string_view where) {
  if (!field(obj, name, where).is_number_integer()) {
    throw ProtocolError(std::string(where) + ": field '" + name + "' must be an integer");
  }
}

void require_box(const json& box, std::string_view where) {
  for (const char* k : {"x0", "y0", "x1", "y1"}) require_number(box, k, where);
  if (!(box["x1"].get<double>() > box["x0"].get<double>()) || !(box["y1"].get<double>() > box["y0"].get<double>())) {
    throw ProtocolError(std::string(where) + ": box must satisfy x1>x0 and y1>y0");
  }
}

void require_sampling(const json& p, std::string_view where) {
  require_integer(p, "max_tokens", where);
  require_number(p, "temperature", where);
  require_number(p, "top_p", where);
  require_integer(p, "n", where);
  require_integer(p, "seed", where);
  if (p["n"].get<long long>() < 1) throw ProtocolError(std::string(where) + ": field 'n' must be >= 1");
}

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos; pos = text.find(needle, pos + needle.size())) ++n;
  return n;
}

}  // namespace

std::string_view endpoint_path(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::text_generate: return "/v1/text/generate";
    case ServiceKind::vl_generate: return "/v1/vl/generate";
    case ServiceKind::mlm_score: return "/v1/mlm/score";
    case ServiceKind::ground: return "/v1/ground";
    case ServiceKind::segment: return "/v1/segment";
    case ServiceKind::embed: return "/v1/embed";
  }
  return "";
}

ServiceKind kind_from_path(std::string_view path) {
  for (auto kind : kAllServiceKinds) {
    if (endpoint_path(kind) == path) return kind;
  }
  throw RequestError(404, "no service at " + std::string(path));
}

void validate_request(ServiceKind kind, const json& p) {
  const std::string where = std::string(endpoint_path(kind)) + " request";
  if (!p.is_object()) throw ProtocolError(where + ": body must be an object");
  switch (kind) {
    case ServiceKind::text_generate:
      require_string(p, "prompt", where);
      require_sampling(p, where);
      break;
    case ServiceKind::vl_generate:
      require_string(p, "image_png_b64", where);
      require_string(p, "prompt", where);
      require_sampling(p, where);
      break;
    case ServiceKind::mlm_score: {
      require_string(p, "context", where);
      require_string(p, "target", where);
      if (count_occurrences(p["context"].get<std::string>(), kMaskPlaceholder) != 1) {
        throw ProtocolError(where + ": field 'context' must contain exactly one <MASK_SPAN>");
      }
      break;
    }
    case ServiceKind::ground:
      require_string(p, "image_png_b64", where);
      require_string(p, "phrase", where);
      break;
    case ServiceKind::segment:
      require_string(p, "image_png_b64", where);
      require_box(field(p, "box", where), where + " box");
      break;
    case ServiceKind::embed: {
      const auto& texts = field(p, "texts", where);
      if (!texts.is_array()) throw ProtocolError(where + ": field 'texts' must be an array");
      for (const auto& t : texts) {
        if (!t.is_string()) throw ProtocolError(where + ": field 'texts' must hold strings");
      }
      break;
    }
  }
}

void validate_response(ServiceKind kind, const json& b) {
  const std::string where = std::string(endpoint_path(kind)) + " response";
  if (!b.is_object()) throw ProtocolError(where + ": body must be an object");
  switch (kind) {
    case ServiceKind::text_generate:
    case ServiceKind::vl_generate: {
      const auto& c = field(b, "completions", where);
      if (!c.is_array()) throw ProtocolError(where + ": field 'completions' must be an array");
      for (const auto& s : c) {
        if (!s.is_string()) throw ProtocolError(where + ": field 'completions' must hold strings");
      }
      break;
    }
    case ServiceKind::mlm_score: {
      const auto& lp = field(b, "log_probs", where);
      if (!lp.is_array()) throw ProtocolError(where + ": field 'log_probs' must be an array");
      for (const auto& v : lp) {
        if (!v.is_number()) throw ProtocolError(where + ": field 'log_probs' must hold numbers");
      }
      require_number(b, "score", where);
      const double s = b["score"].get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError(where + ": field 'score' out of [0,1]");
      break;
    }
    case ServiceKind::ground: {
      const auto& boxes = field(b, "boxes", where);
      if (!boxes.is_array()) throw ProtocolError(where + ": field 'boxes' must be an array");
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& box : boxes) {
        require_box(box, where + " box");
        require_number(box, "score", where + " box");
        const double s = box["score"].get<double>();
        if (s > prev) throw ProtocolError(where + ": field 'boxes' must be sorted by descending score");
        prev = s;
      }
      break;
    }
    case ServiceKind::segment:
      require_string(b, "mask_png_b64", where);
      break;
    case ServiceKind::embed: {
      const auto& vectors = field(b, "vectors", where);
      if (!vectors.is_array()) throw ProtocolError(where + ": field 'vectors' must be an array");
      for (const auto& v : vectors) {
        if (!v.is_array()) throw ProtocolError(where + ": field 'vectors' must hold arrays");
        for (const auto& x : v) {
          if (!x.is_number()) throw ProtocolError(where + ": field 'vectors' must hold numbers");
        }
      }
      break;
    }
  }
}

json canonicalize_payload(const json& payload) {
  if (payload.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : payload.items()) {
      if ((key == "image_png_b64" || key == "mask_png_b64") && value.is_string()) {
        const auto bytes = base64_decode(value.get<std::string>());
        out[key] = json{{"sha256", sha256_hex(std::span<const std::uint8_t>(bytes))}};
      } else {
        out[key] = canonicalize_payload(value);
      }
    }
    return out;
  }
  if (payload.is_array()) {
    json out = json::array();
    for (const auto& v : payload) out.push_back(canonicalize_payload(v));
    return out;
  }
  if (payload.is_number_float()) {
    const double v = payload.get<double>();
    if (std::isfinite(v) && std::trunc(v) == v && std::fabs(v) < 9.0e15) return json(static_cast<long long>(v));
    return payload;
  }
  if (payload.is_number_unsigned()) {
    const auto v = payload.get<std::uint64_t>();
    if (v <= static_cast<std::uint64_t>(std::numeric_limits<long long>::max())) return json(static_cast<long long>(v));
  }
  return payload;
}

CacheKey cache_key(const ServiceRequest& request) {
  std::string material(to_string(request.kind));
  material.push_back('\n');
  material += canonical_dump(canonicalize_payload(request.payload));
  return CacheKey{sha256_hex(material)};
}

namespace {

json sampling_fields(const SamplingParams& params, int n, std::uint64_t seed) {
  return json{{"max_tokens", params.max_tokens},
              {"temperature", params.temperature},
              {"top_p", params.top_p},
              {"n", n},
              {"seed", seed}};
}

}  // namespace

ServiceRequest text_generate_request(const std::string& prompt, const SamplingParams& params, int n,
                                     std::uint64_t seed) {
  auto payload = sampling_fields(params, n, seed);
  payload["prompt"] = prompt;
  return {ServiceKind::text_generate, std::move(payload), true};
}

ServiceRequest vl_generate_request(std::span<const std::uint8_t> png, const std::string& prompt,
                                   const SamplingParams& params, int n, std::uint64_t seed) {
  auto payload = sampling_fields(params, n, seed);
  payload["prompt"] = prompt;
  payload["image_png_b64"] = base64_encode(png);
  return {ServiceKind::vl_generate, std::move(payload), true};
}

ServiceRequest mlm_score_request(const std::string& context, const std::string& target) {
  return {ServiceKind::mlm_score, json{{"context", context}, {"target", target}}, true};
}

ServiceRequest ground_request(std::span<const std::uint8_t> png, const std::string& phrase) {
  return {ServiceKind::ground, json{{"image_png_b64", base64_encode(png)}, {"phrase", phrase}}, true};
}

ServiceRequest segment_request(std::span<const std::uint8_t> png, const Box& box) {
  return {ServiceKind::segment,
          json{{"image_png_b64", base64_encode(png)},
               {"box", json{{"x0", box.x0}, {"y0", box.y0}, {"x1", box.x1}, {"y1", box.y1}}}},
          true};
}

ServiceRequest embed_request(const std::vector<std::string>& texts) {
  return {ServiceKind::embed, json{{"texts", texts}}, true};
}

}  // namespace cvc::services
