#include "cvc/core/types.hpp"

#include <algorithm>
#include <cctype>

#include "cvc/core/errors.hpp"

namespace cvc {

std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::text_generate: return "text_generate";
    case ServiceKind::vl_generate: return "vl_generate";
    case ServiceKind::mlm_score: return "mlm_score";
    case ServiceKind::ground: return "ground";
    case ServiceKind::segment: return "segment";
    case ServiceKind::embed: return "embed";
  }
  return "?";
}

std::string_view to_string(RecordKind kind) {
  return kind == RecordKind::direct_answer ? "direct_answer" : "rationale";
}

ServiceKind service_kind_from_string(std::string_view name) {
  for (auto kind : kAllServiceKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown service kind: " + std::string(name));
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

std::optional<std::size_t> find_ci(std::string_view haystack, std::string_view needle,
                                   std::size_t from) {
  if (needle.empty() || needle.size() > haystack.size()) return std::nullopt;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<std::ptrdiff_t>(i), eq)) {
      return i;
    }
  }
  return std::nullopt;
}

}  // namespace cvc
