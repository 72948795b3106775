#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/config.hpp"
#include "cvc/services/client.hpp"
#include "cvc/services/mocks.hpp"

namespace cvc::pipeline {

enum class Stage { ingest, extract, score, occlude, instruct, trials, select, emit, report };

inline constexpr std::array<Stage, 9> kStageOrder = {Stage::ingest,   Stage::extract, Stage::score,
                                                     Stage::occlude,  Stage::instruct, Stage::trials,
                                                     Stage::select,   Stage::emit,    Stage::report};

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view name);
/// Stages whose outputs `stage` reads.
std::vector<Stage> prerequisites(Stage stage);

struct StageManifest {
  std::string stage;
  std::map<std::string, std::string> inputs;  // upstream stage -> its output digest
  std::string config_digest;
  std::string output_digest;
  std::size_t records = 0;
  std::size_t failures = 0;
  std::size_t skipped = 0;
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  static StageManifest from_json(const nlohmann::json& j);
};

struct StageRun {
  StageManifest manifest;
  bool noop = false;
};

struct ServiceBundle {
  std::shared_ptr<services::ServiceClient> client;
  /// Set when the bundle runs on mocks.
  std::shared_ptr<services::MockTransport> mock;
};

/// HTTP clients for the configured endpoints, or mocks when cfg.use_mocks is
/// set (scripted by cfg.mock_script when given). Responses are cached in
/// memory and, with cfg.cache_dir, on disk.
ServiceBundle make_services(const PipelineConfig& cfg);

/// Stage-wise executor over a work directory laid out as
/// {workdir}/{stage}/records.jsonl + failures.jsonl + manifest.json.
class Pipeline {
public:
  Pipeline(PipelineConfig cfg, std::filesystem::path workdir, std::shared_ptr<services::ServiceClient> client);

  /// Runs one stage. A rerun with unchanged inputs, config and outputs is a
  /// no-op. Throws StageError for a missing prerequisite or a failure-cap
  /// breach, ServiceUnavailable when every failure was an unreachable service.
  StageRun run(Stage stage);
  std::vector<StageRun> run_all();

  const std::filesystem::path& workdir() const noexcept { return workdir_; }
  std::filesystem::path stage_dir(Stage stage) const { return workdir_ / std::string(to_string(stage)); }
  std::optional<StageManifest> manifest(Stage stage) const;
  /// Digest of the config fields that affect stage outputs.
  std::string config_digest() const;

private:
  struct Output {
    std::vector<nlohmann::json> records;
    std::vector<nlohmann::json> failures;
    std::size_t skipped = 0;
    nlohmann::json extra = nlohmann::json::object();
  };

  Output run_ingest();
  Output run_extract();
  Output run_score();
  Output run_occlude();
  Output run_instruct();
  Output run_trials();
  Output run_select();
  Output run_emit();
  Output run_report();

  std::string output_digest(Stage stage) const;

  PipelineConfig cfg_;
  std::filesystem::path workdir_;
  std::shared_ptr<services::ServiceClient> client_;
};

std::string make_instance_id(std::string_view pair_id, std::string_view surface);

}  // namespace cvc::pipeline
