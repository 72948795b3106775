#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"
#include "cvc/services/client.hpp"

namespace cvc::extract {

/// One "k. {with modifiers} -> {without modifiers}" line.
struct EntityLine {
  std::string with_modifiers;
  std::string without_modifiers;
};

/// Throws ParseError when the block is missing or holds no parseable line.
std::vector<EntityLine> parse_entity_block(std::string_view completion);

/// First occurrence of `surface` in `caption`, preferring whole-word matches.
std::optional<Span> locate_surface(std::string_view caption, std::string_view surface);

/// Case-insensitive dedup (first wins); surfaces absent from the caption are
/// dropped and listed in `dropped`.
std::vector<CandidateEntity> locate_entities(std::string_view caption, const std::vector<EntityLine>& lines,
                                             std::vector<std::string>* dropped = nullptr);

std::vector<CandidateEntity> extract_entities(services::ServiceClient& client, const ImageCaptionPair& pair,
                                              const PipelineConfig& cfg);

/// Text after "Question:" up to <end>; lines trimmed and joined with '\n'.
std::string parse_question(std::string_view completion);

/// Whether the full entity surface appears (case-insensitively) in the question.
bool leaks_entity(std::string_view question, std::string_view surface);

struct InstructionResult {
  std::string instruction;
  bool fallback = false;
  int attempts = 0;
  std::vector<std::string> warnings;
};

/// Up to cfg.instruction_attempts generations; leaking or unparseable
/// questions are retried, then the fixed instruction is used.
InstructionResult generate_instruction(services::ServiceClient& client, const CandidateEntity& entity,
                                       const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace cvc::extract
