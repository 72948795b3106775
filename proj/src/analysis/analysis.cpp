#include "cvc/analysis/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace cvc::analysis {

using nlohmann::json;

double compute_recall(const std::vector<TrialSet>& trial_sets) {
  std::size_t total = 0;
  std::size_t success = 0;
  for (const auto& set : trial_sets) {
    for (const auto& t : set.trials) {
      ++total;
      success += t.success ? 1 : 0;
    }
  }
  if (total == 0) throw UndefinedMetric("recall is undefined over zero trials");
  return static_cast<double>(success) / static_cast<double>(total);
}

std::string Fraction::label() const {
  if (num == 0) return "0";
  if (num == den) return "1";
  return std::to_string(num) + "/" + std::to_string(den);
}

Fraction reduce(const Difficulty& f) {
  const int g = std::gcd(f.failures, f.n);
  return g == 0 ? Fraction{0, 1} : Fraction{f.failures / g, f.n / g};
}

double DifficultyHistogram::ratio(const Fraction& f) const {
  if (total == 0) return 0.0;
  const auto it = counts.find(f);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

json DifficultyHistogram::figure_buckets() const {
  static const std::vector<std::pair<std::string, Fraction>> kBuckets = {
      {"4/16", {1, 4}}, {"8/16", {1, 2}}, {"12/16", {3, 4}}, {"14/16", {7, 8}}, {"15/16", {15, 16}}, {"1", {1, 1}}};
  json out = json::array();
  std::size_t named = 0;
  for (const auto& [label, f] : kBuckets) {
    const auto it = counts.find(f);
    const std::size_t c = it == counts.end() ? 0 : it->second;
    named += c;
    out.push_back({{"label", label}, {"count", c}, {"ratio", total ? static_cast<double>(c) / total : 0.0}});
  }
  const auto other = total - named;
  out.push_back({{"label", "other"}, {"count", other}, {"ratio", total ? static_cast<double>(other) / total : 0.0}});
  return out;
}

json DifficultyHistogram::to_json() const {
  json buckets = json::array();
  for (const auto& [f, c] : counts) {
    buckets.push_back({{"difficulty", f.label()}, {"value", f.value()}, {"count", c}, {"ratio", ratio(f)}});
  }
  return {{"total", total}, {"buckets", buckets}, {"figure_buckets", figure_buckets()}};
}

std::string DifficultyHistogram::to_csv() const {
  std::string out = "difficulty,value,count,ratio\n";
  char line[128];
  for (const auto& [f, c] : counts) {
    std::snprintf(line, sizeof line, "%s,%.6f,%zu,%.6f\n", f.label().c_str(), f.value(), c, ratio(f));
    out += line;
  }
  return out;
}

DifficultyHistogram difficulty_histogram(const std::vector<TrialSet>& trial_sets) {
  DifficultyHistogram h;
  for (const auto& set : trial_sets) {
    int failures = 0;
    for (const auto& t : set.trials) failures += t.success ? 0 : 1;
    ++h.counts[reduce({failures, static_cast<int>(set.trials.size())})];
    ++h.total;
  }
  return h;
}

EntityDiversity entity_diversity(const std::vector<std::string>& surfaces, std::size_t top_n) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : surfaces) ++freq[to_lower(trim(s))];
  EntityDiversity out;
  out.distinct = freq.size();
  out.top.assign(freq.begin(), freq.end());
  std::stable_sort(out.top.begin(), out.top.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.top.size() > top_n) out.top.resize(top_n);
  return out;
}

EntityDiversity entity_diversity(const std::vector<CVCInstance>& instances, std::size_t top_n) {
  std::vector<std::string> surfaces;
  surfaces.reserve(instances.size());
  for (const auto& i : instances) surfaces.push_back(i.entity.surface);
  return entity_diversity(surfaces, top_n);
}

RunReport build_report(const std::vector<CVCInstance>& instances, const std::vector<TrialSet>& trial_sets,
                       const std::vector<TrialSet>& selected, std::size_t record_count) {
  const auto hist = difficulty_histogram(trial_sets);
  const auto diversity = entity_diversity(instances);
  std::size_t total_trials = 0;
  std::size_t success = 0;
  for (const auto& set : trial_sets) {
    for (const auto& t : set.trials) {
      ++total_trials;
      success += t.success ? 1 : 0;
    }
  }
  json recall = nullptr;
  if (total_trials > 0) recall = static_cast<double>(success) / static_cast<double>(total_trials);

  json top = json::array();
  for (const auto& [s, c] : diversity.top) top.push_back({{"entity", s}, {"count", c}});

  RunReport report;
  report.document = {{"instances", instances.size()},
                     {"trial_sets", trial_sets.size()},
                     {"total_trials", total_trials},
                     {"successful_trials", success},
                     {"recall", recall},
                     {"selected", selected.size()},
                     {"records", record_count},
                     {"difficulty_histogram", hist.to_json()},
                     {"entity_diversity", {{"distinct", diversity.distinct}, {"top", top}}}};

  char buf[256];
  std::string s;
  std::snprintf(buf, sizeof buf, "instances:          %zu\n", instances.size());
  s += buf;
  std::snprintf(buf, sizeof buf, "trials:             %zu (%zu successful)\n", total_trials, success);
  s += buf;
  if (total_trials > 0) {
    std::snprintf(buf, sizeof buf, "recall:             %.4f\n", static_cast<double>(success) / total_trials);
  } else {
    std::snprintf(buf, sizeof buf, "recall:             undefined\n");
  }
  s += buf;
  std::snprintf(buf, sizeof buf, "selected instances: %zu\n", selected.size());
  s += buf;
  std::snprintf(buf, sizeof buf, "training records:   %zu\n", record_count);
  s += buf;
  std::snprintf(buf, sizeof buf, "distinct entities:  %zu\n", diversity.distinct);
  s += buf;
  s += "difficulty:\n";
  for (const auto& [f, c] : hist.counts) {
    std::snprintf(buf, sizeof buf, "  F=%-6s %6zu  (%.3f)\n", f.label().c_str(), c, hist.ratio(f));
    s += buf;
  }
  report.summary = std::move(s);
  return report;
}

}  // namespace cvc::analysis
