#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"
#include "cvc/services/client.hpp"

namespace cvc::trials {

/// Instruction followed by the chain-of-thought prompt, separated by one space.
std::string rationale_prompt(std::string_view instruction, std::string_view cot_prompt);

/// One vl_generate call with n = cfg.n_trials; exactly N completions in
/// service order, or ProtocolError.
std::vector<std::string> sample_trials(services::ServiceClient& client, std::span<const std::uint8_t> occluded_png,
                                       const CVCInstance& instance, const PipelineConfig& cfg);

/// Parses "Extracted Answer: a, b" inside <begin>/<end>: split on commas,
/// trimmed, lowercased. Any "unknown" item collapses the list to {"unknown"}.
std::vector<std::string> parse_extracted_answer(std::string_view completion);

std::vector<std::string> extract_answer(services::ServiceClient& client, const std::string& rationale,
                                        const PipelineConfig& cfg);

bool is_unknown(const std::vector<std::string>& answers);

/// Success iff some answer equals the target case-insensitively or has cosine
/// similarity >= cfg.similarity_tau with it. Unknown never succeeds and makes
/// no embed call.
bool check_answer(services::ServiceClient& client, const std::vector<std::string>& answers,
                  std::string_view target, const PipelineConfig& cfg);

double cosine(std::span<const double> a, std::span<const double> b);

/// F = (N - successes) / N, exact.
Difficulty difficulty(const TrialSet& trial_set);
Difficulty difficulty_from_flags(std::span<const bool> success);

/// Extracts and checks every rationale; per-trial failures are recorded in
/// Trial::note and count as unsuccessful.
TrialSet judge_trials(services::ServiceClient& client, const CVCInstance& instance,
                      const std::vector<std::string>& rationales, const PipelineConfig& cfg);

/// F > alpha (>= when cfg.alpha_strict is false).
bool exceeds_alpha(const Difficulty& f, const PipelineConfig& cfg);

/// Keeps sets with F above alpha and at least one success, and sets
/// chosen_trial_index uniformly among successful trials using a seed derived
/// from cfg.seeds.selection and the instance id.
std::vector<TrialSet> select_instances(const std::vector<TrialSet>& trial_sets, const PipelineConfig& cfg);

}  // namespace cvc::trials
