#pragma once

#include <string>
#include <string_view>

namespace cvc::extract {

enum class PromptName { entity_extraction, instruction_generation, answer_extraction };

/// Marks where the caption, entity or rationale is substituted.
inline constexpr std::string_view kPromptSlot = "{{INPUT}}";

/// Few-shot template bundled from assets/prompts/{name}.txt, byte for byte.
struct PromptTemplate {
  PromptName name;
  std::string_view text;

  std::string render(std::string_view input) const;
};

const PromptTemplate& prompt_template(PromptName name);
std::string_view asset_file_name(PromptName name);

/// Content strictly between the first "<begin>" and the following "<end>".
/// Throws cvc::ParseError when either marker is missing.
std::string_view delimited_block(std::string_view completion);

}  // namespace cvc::extract
