#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>

#include <nlohmann/json.hpp>

#include "cvc/services/protocol.hpp"

namespace cvc::services {

/// Content-addressed response store: in memory, optionally persisted under
/// {dir}/{digest[0:2]}/{digest}.json. Entries are written to a temporary file
/// and renamed into place, so a reader sees either no entry or a whole one.
class ResponseCache {
public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(ServiceKind kind, const CacheKey& key) const;
  void put(ServiceKind kind, const CacheKey& key, const nlohmann::json& body);
  std::size_t size() const;

private:
  std::filesystem::path entry_path(const CacheKey& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  mutable std::map<CacheKey, nlohmann::json> entries_;
};

}  // namespace cvc::services
