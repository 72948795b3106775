#include "cvc/services/cache.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cvc/core/errors.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::services {

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::entry_path(const CacheKey& key) const {
  return dir_ / key.digest.substr(0, 2) / (key.digest + ".json");
}

std::optional<nlohmann::json> ResponseCache::get(ServiceKind kind, const CacheKey& key) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (dir_.empty()) return std::nullopt;
  const auto path = entry_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(in);
    validate_response(kind, body);
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries count as misses and get overwritten
  }
  std::unique_lock lock(mutex_);
  entries_.emplace(key, body);
  return body;
}

void ResponseCache::put(ServiceKind kind, const CacheKey& key, const nlohmann::json& body) {
  validate_response(kind, body);
  {
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(key, body);
  }
  if (dir_.empty()) return;
  static std::atomic<unsigned long long> counter{0};
  const auto path = entry_path(key);
  std::filesystem::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::this_thread::get_id() << "." << counter++;
  const auto tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << canonical_dump(body);
  }
  std::filesystem::rename(tmp, path);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace cvc::services
