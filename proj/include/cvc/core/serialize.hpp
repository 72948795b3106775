#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/types.hpp"

namespace cvc {

using nlohmann::json;

void to_json(json& j, const Span& v);
void from_json(const json& j, Span& v);
void to_json(json& j, const Box& v);
void from_json(const json& j, Box& v);
void to_json(json& j, const ImageCaptionPair& v);
void from_json(const json& j, ImageCaptionPair& v);
void to_json(json& j, const CandidateEntity& v);
void from_json(const json& j, CandidateEntity& v);
void to_json(json& j, const PatchCorner& v);
void from_json(const json& j, PatchCorner& v);
void to_json(json& j, const OcclusionMeta& v);
void from_json(const json& j, OcclusionMeta& v);
void to_json(json& j, const CVCInstance& v);
void from_json(const json& j, CVCInstance& v);
void to_json(json& j, const Trial& v);
void from_json(const json& j, Trial& v);
void to_json(json& j, const Difficulty& v);
void from_json(const json& j, Difficulty& v);
void to_json(json& j, const TrialSet& v);
void from_json(const json& j, TrialSet& v);
void to_json(json& j, const TrainingRecord& v);
void from_json(const json& j, TrainingRecord& v);

/// Compact, key-sorted serialization. All stage outputs use it.
std::string canonical_dump(const json& j);

/// One canonical record per line; lines end with '\n'.
std::string to_jsonl(const std::vector<json>& records);
void write_text_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
std::vector<json> read_jsonl(const std::filesystem::path& path);

template <typename T>
std::vector<json> to_json_lines(const std::vector<T>& items) {
  std::vector<json> out;
  out.reserve(items.size());
  for (const auto& item : items) out.emplace_back(item);
  return out;
}

template <typename T>
std::vector<T> from_json_lines(const std::vector<json>& lines) {
  std::vector<T> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(line.get<T>());
  return out;
}

}  // namespace cvc
