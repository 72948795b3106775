#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"

namespace cvc::emit {

inline constexpr std::string_view kImageToken = "<image>";

/// One direct_answer record (human: image token + q, model: the entity) and
/// one rationale record (human: image token + q + ' ' + p, model: the chosen
/// trial). With cfg.emit_all_successful, one rationale record per successful
/// trial. Throws ContractViolation when no trial was chosen.
std::vector<TrainingRecord> to_records(const CVCInstance& instance, const TrialSet& trial_set,
                                       const PipelineConfig& cfg);

/// {id, image, conversations: [{from: "human", value}, {from: "gpt", value}]}
nlohmann::json to_conversation(const TrainingRecord& record);

/// Reads and schema-checks a conversation-format array. Throws IngestError.
std::vector<nlohmann::json> read_general_dataset(const std::filesystem::path& path);

/// Concatenation of both inputs in seeded-shuffled order; records are not modified.
std::vector<nlohmann::json> mix_with_general(std::vector<nlohmann::json> cvc_records,
                                             const std::vector<nlohmann::json>& general, std::uint64_t seed);

struct DatasetManifest {
  std::size_t count = 0;
  std::string digest;
};

/// "[\n" + one canonical record per line, comma separated + "\n]\n".
std::string dataset_bytes(const std::vector<nlohmann::json>& records);
DatasetManifest write_dataset(const std::vector<nlohmann::json>& records, const std::filesystem::path& out_path);
std::vector<nlohmann::json> read_dataset(const std::filesystem::path& path);

}  // namespace cvc::emit
