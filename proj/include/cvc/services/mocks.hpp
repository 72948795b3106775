#pragma once

#include <atomic>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/services/protocol.hpp"
#include "cvc/services/transport.hpp"

namespace cvc::services {

/// Scripted answers for the mock services. Anything not scripted falls back to
/// deterministic rules, so every mock is a pure function of (payload, seed).
struct MockScript {
  /// sha256(prompt) -> completions, cycled to fill n.
  std::map<std::string, std::vector<std::string>> text;
  /// sha256(context "\x1f" target) -> per-subword log-probabilities.
  std::map<std::string, std::vector<double>> mlm;
  /// text -> (anchor text, cosine to anchor).
  std::map<std::string, std::pair<std::string, double>> embed_aliases;
  /// Terms the fallback entity extractor recognizes. Defaults to the toy vocabulary.
  std::vector<std::string> lexicon;
  /// Return one completion fewer than requested from /v1/vl/generate.
  bool vl_drop_last = false;

  static std::string text_fingerprint(const std::string& prompt);
  static std::string mlm_fingerprint(const std::string& context, const std::string& target);

  void script_text(const std::string& prompt, std::vector<std::string> completions);
  void script_mlm(const std::string& context, const std::string& target, std::vector<double> log_probs);
  void script_similarity(const std::string& text, const std::string& anchor, double cosine);

  nlohmann::json to_json() const;
  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::string& path);
};

/// In-process implementations of the six services.
class MockServices {
public:
  static constexpr int kEmbeddingDim = 64;

  explicit MockServices(MockScript script = {});

  /// Throws RequestError(400) for schema-invalid payloads.
  nlohmann::json handle(ServiceKind kind, const nlohmann::json& payload) const;

  const MockScript& script() const noexcept { return script_; }

  nlohmann::json text_generate(const nlohmann::json& payload) const;
  nlohmann::json vl_generate(const nlohmann::json& payload) const;
  nlohmann::json mlm_score(const nlohmann::json& payload) const;
  nlohmann::json ground(const nlohmann::json& payload) const;
  nlohmann::json segment(const nlohmann::json& payload) const;
  nlohmann::json embed(const nlohmann::json& payload) const;

  std::vector<double> embedding(const std::string& text) const;

private:
  std::string rule_based_completion(const std::string& prompt) const;

  MockScript script_;
};

/// Transport that answers from MockServices, with call counters, in-flight
/// tracking, and scripted failure injection for retry tests.
class MockTransport final : public Transport {
public:
  using Interceptor = std::function<std::optional<HttpReply>(ServiceKind, const nlohmann::json&)>;

  explicit MockTransport(std::shared_ptr<const MockServices> services);

  HttpReply post(const std::string& base_url, const std::string& path, const std::string& body) override;

  /// The next calls to `kind` return these statuses (in order) before serving normally.
  void fail_next(ServiceKind kind, std::vector<int> statuses);
  void set_interceptor(Interceptor interceptor);

  std::size_t calls(ServiceKind kind) const;
  std::size_t total_calls() const;
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }

private:
  std::shared_ptr<const MockServices> services_;
  mutable std::mutex mutex_;
  std::map<ServiceKind, std::deque<int>> failures_;
  std::map<ServiceKind, std::size_t> calls_;
  Interceptor interceptor_;
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace cvc::services
