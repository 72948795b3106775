#include "cvc/emit/emit.hpp"

#include <fstream>
#include <span>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::emit {

using nlohmann::json;

std::vector<TrainingRecord> to_records(const CVCInstance& instance, const TrialSet& trial_set,
                                       const PipelineConfig& cfg) {
  if (!trial_set.chosen_trial_index) {
    throw ContractViolation("to_records: no chosen trial for " + trial_set.instance_id);
  }
  const auto chosen = *trial_set.chosen_trial_index;
  if (chosen < 0 || static_cast<std::size_t>(chosen) >= trial_set.trials.size() ||
      !trial_set.trials[static_cast<std::size_t>(chosen)].success) {
    throw ContractViolation("to_records: chosen trial " + std::to_string(chosen) + " of " + trial_set.instance_id +
                            " is not a successful trial");
  }

  const std::string question = std::string(kImageToken) + "\n" + instance.instruction;
  std::vector<TrainingRecord> out;
  out.push_back({instance.instance_id + "-direct", instance.occluded_image_ref, question, instance.entity.surface,
                 RecordKind::direct_answer});

  auto rationale_record = [&](const Trial& t) {
    return TrainingRecord{instance.instance_id + "-rationale-" + std::to_string(t.trial_index),
                          instance.occluded_image_ref, question + " " + cfg.cot_prompt, t.rationale,
                          RecordKind::rationale};
  };
  if (cfg.emit_all_successful) {
    for (const auto& t : trial_set.trials) {
      if (t.success) out.push_back(rationale_record(t));
    }
  } else {
    out.push_back(rationale_record(trial_set.trials[static_cast<std::size_t>(chosen)]));
  }
  return out;
}

json to_conversation(const TrainingRecord& record) {
  return {{"id", record.record_id},
          {"image", record.image_ref},
          {"conversations",
           json::array({{{"from", "human"}, {"value", record.human_turn}}, {{"from", "gpt"}, {"value", record.model_turn}}})}};
}

std::vector<json> read_general_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(IngestError::Kind::unreadable, "cannot read general dataset " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(IngestError::Kind::unreadable, "general dataset is not valid JSON: " + std::string(e.what()));
  }
  if (!doc.is_array()) throw IngestError(IngestError::Kind::schema, "general dataset must be a top-level array");
  std::vector<json> out;
  out.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& r = doc[i];
    const auto where = "general dataset record " + std::to_string(i);
    if (!r.is_object() || !r.contains("id") || !r.contains("conversations") || !r["conversations"].is_array() ||
        r["conversations"].empty()) {
      throw IngestError(IngestError::Kind::schema, where + ": needs id and a non-empty conversations array");
    }
    for (const auto& turn : r["conversations"]) {
      if (!turn.is_object() || !turn.contains("from") || !turn.contains("value") || !turn["from"].is_string() ||
          !turn["value"].is_string()) {
        throw IngestError(IngestError::Kind::schema, where + ": every turn needs string from/value");
      }
    }
    out.push_back(r);
  }
  return out;
}

std::vector<json> mix_with_general(std::vector<json> cvc_records, const std::vector<json>& general,
                                   std::uint64_t seed) {
  cvc_records.insert(cvc_records.end(), general.begin(), general.end());
  seeded_shuffle(std::span<json>(cvc_records), seed);
  return cvc_records;
}

std::string dataset_bytes(const std::vector<json>& records) {
  if (records.empty()) return "[]\n";
  std::string out = "[\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += canonical_dump(records[i]);
    out += i + 1 < records.size() ? ",\n" : "\n";
  }
  out += "]\n";
  return out;
}

DatasetManifest write_dataset(const std::vector<json>& records, const std::filesystem::path& out_path) {
  const auto bytes = dataset_bytes(records);
  write_text_file(out_path, bytes);
  return {records.size(), sha256_hex(bytes)};
}

std::vector<json> read_dataset(const std::filesystem::path& path) {
  const auto doc = json::parse(read_text_file(path));
  if (!doc.is_array()) throw IngestError(IngestError::Kind::schema, path.string() + " is not a top-level array");
  return doc.get<std::vector<json>>();
}

}  // namespace cvc::emit
