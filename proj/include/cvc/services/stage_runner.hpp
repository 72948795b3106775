#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cvc/core/errors.hpp"

namespace cvc::services {

template <typename Result>
struct StageOutcome {
  /// Keyed by item id, so iteration order never depends on completion order.
  std::map<std::string, Result> results;
  std::map<std::string, std::string> failures;

  std::size_t total() const noexcept { return results.size() + failures.size(); }
  double failure_ratio() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(failures.size()) / static_cast<double>(total());
  }
};

/// Runs `worker` over `items` on at most `bound` threads. Each worker issues
/// its service calls sequentially, so at most `bound` calls are in flight.
/// A throwing worker records a failure for its item; the stage throws
/// StageError only when the failure ratio exceeds `failure_cap`, or
/// ServiceUnavailable when all of those failures were unreachable services.
template <typename Item, typename Result>
StageOutcome<Result> run_stage(const std::vector<Item>& items,
                               const std::function<std::string(const Item&)>& id_of,
                               const std::function<Result(const Item&)>& worker, int bound,
                               double failure_cap) {
  if (bound < 1) throw ContractViolation("run_stage bound must be >= 1");
  StageOutcome<Result> outcome;
  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t unavailable = 0;

  auto drain = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      const auto& item = items[i];
      const auto id = id_of(item);
      try {
        auto result = worker(item);
        std::lock_guard lock(mutex);
        if (outcome.results.contains(id) || outcome.failures.contains(id)) {
          throw ContractViolation("duplicate work item id: " + id);
        }
        outcome.results.emplace(id, std::move(result));
      } catch (const ContractViolation&) {
        throw;
      } catch (const ServiceUnavailable& e) {
        std::lock_guard lock(mutex);
        outcome.failures.emplace(id, e.what());
        ++unavailable;
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        outcome.failures.emplace(id, e.what());
      }
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(bound), items.size()));
  if (n_threads <= 1) {
    drain();
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    {
      std::vector<std::jthread> pool;
      pool.reserve(n_threads);
      for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            drain();
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  if (outcome.failure_ratio() > failure_cap) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "stage failure rate %.1f%% (%zu of %zu items) exceeds cap %.1f%%",
                  100.0 * outcome.failure_ratio(), outcome.failures.size(), outcome.total(), 100.0 * failure_cap);
    // Every failure being an unreachable service is an outage, not bad data.
    if (unavailable == outcome.failures.size()) throw ServiceUnavailable(buf);
    throw StageError(buf);
  }
  return outcome;
}

}  // namespace cvc::services
