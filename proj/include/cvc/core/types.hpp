#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cvc {

/// Half-open character range [begin, end) into a caption.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const Span&) const = default;
};

/// Pixel box, x1/y1 exclusive.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  bool operator==(const Box&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;

struct ImageCaptionPair {
  std::string pair_id;
  std::string image_ref;
  std::string caption;

  bool operator==(const ImageCaptionPair&) const = default;
};

struct CandidateEntity {
  std::string surface;
  Span span;
  std::optional<double> causality_score;

  bool operator==(const CandidateEntity&) const = default;
};

struct PatchCorner {
  int x = 0;
  int y = 0;
  bool operator==(const PatchCorner&) const = default;
};

struct OcclusionMeta {
  Box box;
  int side = 0;
  int gap = 0;
  std::vector<PatchCorner> patches;
  Rgb fill_rgb{};
  double coverage = 0.0;
  double ground_score = 0.0;

  bool operator==(const OcclusionMeta&) const = default;
};

struct CVCInstance {
  std::string instance_id;
  std::string pair_id;
  CandidateEntity entity;
  std::string source_image_ref;
  std::string occluded_image_ref;
  std::string instruction;
  OcclusionMeta occlusion_meta;

  bool operator==(const CVCInstance&) const = default;
};

inline constexpr std::string_view kUnknownAnswer = "unknown";

struct Trial {
  int trial_index = 0;
  std::string rationale;
  std::vector<std::string> extracted_answers;
  bool success = false;
  /// Why the trial failed when it was not judged on its answer (parse or service error).
  std::string note;

  bool operator==(const Trial&) const = default;
};

/// Exact F = failures / n.
struct Difficulty {
  int failures = 0;
  int n = 1;

  double value() const noexcept { return static_cast<double>(failures) / n; }
  int successes() const noexcept { return n - failures; }
  bool operator==(const Difficulty&) const = default;
};

struct TrialSet {
  std::string instance_id;
  std::vector<Trial> trials;
  Difficulty difficulty;
  std::optional<int> chosen_trial_index;

  bool operator==(const TrialSet&) const = default;
};

enum class RecordKind { direct_answer, rationale };

struct TrainingRecord {
  std::string record_id;
  std::string image_ref;
  std::string human_turn;
  std::string model_turn;
  RecordKind kind = RecordKind::direct_answer;

  bool operator==(const TrainingRecord&) const = default;
};

enum class ServiceKind { text_generate, vl_generate, mlm_score, ground, segment, embed };

inline constexpr std::array<ServiceKind, 6> kAllServiceKinds = {
    ServiceKind::text_generate, ServiceKind::vl_generate, ServiceKind::mlm_score,
    ServiceKind::ground,        ServiceKind::segment,     ServiceKind::embed};

std::string_view to_string(ServiceKind kind);
std::string_view to_string(RecordKind kind);
ServiceKind service_kind_from_string(std::string_view name);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
/// Case-insensitive (ASCII) first occurrence of needle in haystack at or after `from`.
std::optional<std::size_t> find_ci(std::string_view haystack, std::string_view needle,
                                   std::size_t from = 0);

}  // namespace cvc
