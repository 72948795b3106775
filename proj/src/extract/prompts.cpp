#include "cvc/extract/prompts.hpp"

#include "cvc/core/errors.hpp"

namespace cvc::extract {

namespace {
#include "prompt_assets.inc"
}  // namespace

std::string PromptTemplate::render(std::string_view input) const {
  const auto pos = text.find(kPromptSlot);
  std::string out;
  out.reserve(text.size() + input.size());
  out.append(text.substr(0, pos));
  out.append(input);
  out.append(text.substr(pos + kPromptSlot.size()));
  return out;
}

const PromptTemplate& prompt_template(PromptName name) {
  static const PromptTemplate entity{PromptName::entity_extraction, kEntityExtractionAsset};
  static const PromptTemplate instruction{PromptName::instruction_generation, kInstructionGenerationAsset};
  static const PromptTemplate answer{PromptName::answer_extraction, kAnswerExtractionAsset};
  switch (name) {
    case PromptName::entity_extraction: return entity;
    case PromptName::instruction_generation: return instruction;
    case PromptName::answer_extraction: return answer;
  }
  return entity;
}

std::string_view asset_file_name(PromptName name) {
  switch (name) {
    case PromptName::entity_extraction: return "entity_extraction.txt";
    case PromptName::instruction_generation: return "instruction_generation.txt";
    case PromptName::answer_extraction: return "answer_extraction.txt";
  }
  return "";
}

std::string_view delimited_block(std::string_view completion) {
  constexpr std::string_view kBegin = "<begin>";
  constexpr std::string_view kEnd = "<end>";
  const auto begin = completion.find(kBegin);
  if (begin == std::string_view::npos) throw ParseError("completion has no <begin> marker");
  const auto body = begin + kBegin.size();
  const auto end = completion.find(kEnd, body);
  if (end == std::string_view::npos) throw ParseError("completion has no <end> marker");
  return completion.substr(body, end - body);
}

}  // namespace cvc::extract
