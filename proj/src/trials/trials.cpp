#include "cvc/trials/trials.hpp"

#include <cmath>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/extract/prompts.hpp"

namespace cvc::trials {

std::string rationale_prompt(std::string_view instruction, std::string_view cot_prompt) {
  std::string out(instruction);
  out.push_back(' ');
  out.append(cot_prompt);
  return out;
}

std::vector<std::string> sample_trials(services::ServiceClient& client, std::span<const std::uint8_t> occluded_png,
                                       const CVCInstance& instance, const PipelineConfig& cfg) {
  auto completions = services::vl_generate(client, occluded_png, rationale_prompt(instance.instruction, cfg.cot_prompt),
                                           cfg.sampling, cfg.n_trials,
                                           derive_seed(cfg.seeds.sampling, "trials", instance.instance_id));
  if (static_cast<int>(completions.size()) != cfg.n_trials) {
    throw ProtocolError("/v1/vl/generate response: expected " + std::to_string(cfg.n_trials) + " completions, got " +
                        std::to_string(completions.size()));
  }
  return completions;
}

std::vector<std::string> parse_extracted_answer(std::string_view completion) {
  const auto block = extract::delimited_block(completion);
  constexpr std::string_view kMarker = "Extracted Answer:";
  const auto pos = block.find(kMarker);
  if (pos == std::string_view::npos) throw ParseError("answer block has no \"Extracted Answer:\" line");
  auto rest = block.substr(pos + kMarker.size());
  rest = rest.substr(0, rest.find('\n'));
  std::vector<std::string> answers;
  std::size_t start = 0;
  while (start <= rest.size()) {
    auto comma = rest.find(',', start);
    if (comma == std::string_view::npos) comma = rest.size();
    auto item = to_lower(trim(rest.substr(start, comma - start)));
    if (!item.empty()) {
      if (item == kUnknownAnswer) return {std::string(kUnknownAnswer)};
      answers.push_back(std::move(item));
    }
    start = comma + 1;
  }
  if (answers.empty()) throw ParseError("answer block has an empty answer");
  return answers;
}

std::vector<std::string> extract_answer(services::ServiceClient& client, const std::string& rationale,
                                        const PipelineConfig& cfg) {
  if (trim(rationale).empty()) throw ParseError("empty rationale");
  const auto prompt = extract::prompt_template(extract::PromptName::answer_extraction).render(rationale);
  const auto completions = services::text_generate(client, prompt, {0.0, 1.0, cfg.llm.max_tokens}, 1,
                                                   derive_seed(cfg.seeds.sampling, "answer"));
  if (completions.empty()) throw ProtocolError("/v1/text/generate returned no completion");
  return parse_extracted_answer(completions.front());
}

bool is_unknown(const std::vector<std::string>& answers) {
  return answers.size() == 1 && answers.front() == kUnknownAnswer;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ProtocolError("embedding vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

bool check_answer(services::ServiceClient& client, const std::vector<std::string>& answers, std::string_view target,
                  const PipelineConfig& cfg) {
  if (answers.empty() || is_unknown(answers)) return false;
  const auto goal = to_lower(trim(target));
  for (const auto& a : answers) {
    if (to_lower(trim(a)) == goal) return true;
  }
  std::vector<std::string> texts(answers.begin(), answers.end());
  texts.push_back(goal);
  const auto vectors = services::embed(client, texts);
  const auto& target_vec = vectors.back();
  for (std::size_t i = 0; i + 1 < vectors.size(); ++i) {
    if (cosine(vectors[i], target_vec) >= cfg.similarity_tau) return true;
  }
  return false;
}

Difficulty difficulty_from_flags(std::span<const bool> success) {
  if (success.empty()) throw ContractViolation("difficulty of an empty trial set");
  int failures = 0;
  for (bool s : success) failures += s ? 0 : 1;
  return {failures, static_cast<int>(success.size())};
}

Difficulty difficulty(const TrialSet& trial_set) {
  if (trial_set.trials.empty()) throw ContractViolation("difficulty of an empty trial set");
  int failures = 0;
  for (const auto& t : trial_set.trials) failures += t.success ? 0 : 1;
  return {failures, static_cast<int>(trial_set.trials.size())};
}

TrialSet judge_trials(services::ServiceClient& client, const CVCInstance& instance,
                      const std::vector<std::string>& rationales, const PipelineConfig& cfg) {
  TrialSet set;
  set.instance_id = instance.instance_id;
  for (std::size_t j = 0; j < rationales.size(); ++j) {
    Trial trial;
    trial.trial_index = static_cast<int>(j);
    trial.rationale = rationales[j];
    try {
      trial.extracted_answers = extract_answer(client, trial.rationale, cfg);
      trial.success = check_answer(client, trial.extracted_answers, instance.entity.surface, cfg);
    } catch (const ParseError& e) {
      trial.note = std::string("answer extraction failed: ") + e.what();
    } catch (const ServiceError& e) {
      trial.note = std::string("answer check failed: ") + e.what();
    }
    set.trials.push_back(std::move(trial));
  }
  set.difficulty = difficulty(set);
  return set;
}

bool exceeds_alpha(const Difficulty& f, const PipelineConfig& cfg) {
  return cfg.alpha_strict ? f.value() > cfg.alpha : f.value() >= cfg.alpha;
}

std::vector<TrialSet> select_instances(const std::vector<TrialSet>& trial_sets, const PipelineConfig& cfg) {
  std::vector<TrialSet> selected;
  for (const auto& set : trial_sets) {
    const auto f = difficulty(set);
    if (f.successes() < 1 || !exceeds_alpha(f, cfg)) continue;
    std::vector<int> successful;
    for (const auto& t : set.trials) {
      if (t.success) successful.push_back(t.trial_index);
    }
    Rng rng(derive_seed(cfg.seeds.selection, "choose", set.instance_id));
    auto chosen = set;
    chosen.difficulty = f;
    chosen.chosen_trial_index = successful[static_cast<std::size_t>(uniform_index(rng, successful.size()))];
    selected.push_back(std::move(chosen));
  }
  return selected;
}

}  // namespace cvc::trials
