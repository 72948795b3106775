#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/errors.hpp"
#include "cvc/core/types.hpp"

namespace cvc::analysis {

class UndefinedMetric : public Error {
public:
  using Error::Error;
};

/// Successful trials / all trials. Throws UndefinedMetric with zero trials.
double compute_recall(const std::vector<TrialSet>& trial_sets);

/// Exact F as a reduced fraction.
struct Fraction {
  int num = 0;
  int den = 1;

  double value() const noexcept { return static_cast<double>(num) / den; }
  std::string label() const;
  bool operator==(const Fraction&) const = default;
  bool operator<(const Fraction& o) const noexcept {
    return static_cast<long long>(num) * o.den < static_cast<long long>(o.num) * den;
  }
};

Fraction reduce(const Difficulty& f);

struct DifficultyHistogram {
  std::map<Fraction, std::size_t> counts;
  std::size_t total = 0;

  double ratio(const Fraction& f) const;
  /// Figure-style buckets 4/16, 8/16, 12/16, 14/16, 15/16, 1 and "other".
  nlohmann::json figure_buckets() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

DifficultyHistogram difficulty_histogram(const std::vector<TrialSet>& trial_sets);

struct EntityDiversity {
  std::size_t distinct = 0;
  /// (lowercased surface, count), most frequent first, ties alphabetical.
  std::vector<std::pair<std::string, std::size_t>> top;
};

EntityDiversity entity_diversity(const std::vector<std::string>& surfaces, std::size_t top_n = 20);
EntityDiversity entity_diversity(const std::vector<CVCInstance>& instances, std::size_t top_n = 20);

struct RunReport {
  nlohmann::json document;
  std::string summary;
};

RunReport build_report(const std::vector<CVCInstance>& instances, const std::vector<TrialSet>& trial_sets,
                       const std::vector<TrialSet>& selected, std::size_t record_count);

}  // namespace cvc::analysis
