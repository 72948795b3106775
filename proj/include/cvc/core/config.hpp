#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cvc/core/types.hpp"

namespace cvc {

enum class EntityMode { causal, random_entity };
enum class CaptionSelection { first, all };

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 0.95;
  int max_tokens = 512;
};

struct RetryPolicy {
  int attempts = 3;
  int backoff_ms = 250;
  double growth = 4.0;
};

/// Independent seed streams. Each defaults to a derivation of the master seed,
/// so trial sampling and trial choice can be varied separately.
struct Seeds {
  std::uint64_t master = 0;
  std::uint64_t sampling = 0;
  std::uint64_t selection = 0;
  std::uint64_t occlusion = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t entity = 0;
};

struct PipelineConfig {
  double gamma = 0.3;
  int n_trials = 16;
  double alpha = 0.75;
  bool alpha_strict = true;
  double similarity_tau = 0.80;
  SamplingParams sampling{};
  SamplingParams llm{0.7, 0.95, 256};
  std::string cot_prompt = "Let's think step by step";
  std::string fixed_instruction = "What is the occluded object?";
  Rgb fill_rgb{124, 116, 104};
  double patch_gap_ratio = 0.25;
  bool patch_jitter = true;
  double ground_score_floor = 0.25;
  EntityMode mode = EntityMode::causal;
  CaptionSelection captions_per_image = CaptionSelection::first;
  Seeds seeds{};
  std::map<ServiceKind, std::string> endpoints;
  bool use_mocks = false;
  std::string mock_script;
  RetryPolicy retry{};
  int concurrency = 8;
  double failure_cap = 0.05;
  int instruction_attempts = 3;
  bool emit_all_successful = false;
  std::string captions_file;
  std::string image_root;
  std::string general_dataset;
  std::string cache_dir;
};

/// Builds a fully defaulted config from a parsed document. Unknown keys and
/// out-of-range values raise ConfigError naming the field.
PipelineConfig validate_config(const nlohmann::json& raw);

/// Relative paths in the file resolve against its directory.
PipelineConfig load_config_file(const std::string& path);

/// Applies CVC_{SERVICE}_URL overrides, e.g. CVC_MLM_SCORE_URL.
void apply_env_overrides(PipelineConfig& cfg,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv);
void apply_env_overrides(PipelineConfig& cfg);

/// Canonical document for a config; validate_config(to_json(c)) == c.
nlohmann::json to_json(const PipelineConfig& cfg);

std::string_view to_string(EntityMode mode);

}  // namespace cvc
