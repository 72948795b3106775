#include "cvc/extract/extract.hpp"

#include <cctype>
#include <set>

#include <spdlog/spdlog.h>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/extract/prompts.hpp"

namespace cvc::extract {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Parses "12. lhs -> rhs"; nullopt for anything else.
std::optional<EntityLine> parse_entity_line(std::string_view raw) {
  const auto line = trim(raw);
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i >= line.size() || line[i] != '.') return std::nullopt;
  const std::string_view rest = std::string_view(line).substr(i + 1);
  const auto arrow = rest.find("->");
  if (arrow == std::string_view::npos) return std::nullopt;
  EntityLine out{trim(rest.substr(0, arrow)), trim(rest.substr(arrow + 2))};
  if (out.without_modifiers.empty()) return std::nullopt;
  return out;
}

SamplingParams greedy(const PipelineConfig& cfg) { return {0.0, 1.0, cfg.llm.max_tokens}; }

}  // namespace

std::vector<EntityLine> parse_entity_block(std::string_view completion) {
  const auto block = delimited_block(completion);
  std::vector<EntityLine> out;
  for (auto line : split_lines(block)) {
    if (auto parsed = parse_entity_line(line)) out.push_back(std::move(*parsed));
  }
  if (out.empty()) throw ParseError("entity block has no parseable \"k. a -> b\" lines");
  return out;
}

std::optional<Span> locate_surface(std::string_view caption, std::string_view surface) {
  std::optional<std::size_t> first;
  for (auto pos = find_ci(caption, surface); pos; pos = find_ci(caption, surface, *pos + 1)) {
    if (!first) first = pos;
    const auto end = *pos + surface.size();
    const bool left = *pos == 0 || !is_word_char(caption[*pos - 1]);
    const bool right = end == caption.size() || !is_word_char(caption[end]);
    if (left && right) return Span{*pos, end};
  }
  if (first) return Span{*first, *first + surface.size()};
  return std::nullopt;
}

std::vector<CandidateEntity> locate_entities(std::string_view caption, const std::vector<EntityLine>& lines,
                                             std::vector<std::string>* dropped) {
  std::vector<CandidateEntity> out;
  std::set<std::string> seen;
  for (const auto& line : lines) {
    const auto key = to_lower(line.without_modifiers);
    if (seen.contains(key)) continue;
    const auto span = locate_surface(caption, line.without_modifiers);
    if (!span) {
      if (dropped) dropped->push_back(line.without_modifiers);
      continue;
    }
    seen.insert(key);
    out.push_back({line.without_modifiers, *span, std::nullopt});
  }
  return out;
}

std::vector<CandidateEntity> extract_entities(services::ServiceClient& client, const ImageCaptionPair& pair,
                                              const PipelineConfig& cfg) {
  if (trim(pair.caption).empty()) throw ContractViolation("extract_entities: empty caption for " + pair.pair_id);
  const auto prompt = prompt_template(PromptName::entity_extraction).render(pair.caption);
  const auto completions =
      services::text_generate(client, prompt, greedy(cfg), 1, derive_seed(cfg.seeds.sampling, "extract"));
  if (completions.empty()) throw ProtocolError("/v1/text/generate returned no completion");
  std::vector<std::string> dropped;
  auto entities = locate_entities(pair.caption, parse_entity_block(completions.front()), &dropped);
  for (const auto& d : dropped) {
    spdlog::warn("{}: extracted entity '{}' does not occur in the caption; dropped", pair.pair_id, d);
  }
  return entities;
}

std::string parse_question(std::string_view completion) {
  const auto block = delimited_block(completion);
  const auto marker = block.find("Question:");
  if (marker == std::string_view::npos) throw ParseError("instruction block has no \"Question:\" line");
  std::string out;
  for (auto line : split_lines(block.substr(marker + 9))) {
    const auto t = trim(line);
    if (t.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out += t;
  }
  if (out.empty()) throw ParseError("instruction block has an empty question");
  return out;
}

bool leaks_entity(std::string_view question, std::string_view surface) {
  return find_ci(question, trim(surface)).has_value();
}

InstructionResult generate_instruction(services::ServiceClient& client, const CandidateEntity& entity,
                                       const PipelineConfig& cfg, std::uint64_t seed) {
  if (trim(entity.surface).empty()) throw ContractViolation("generate_instruction: empty entity surface");
  const auto prompt = prompt_template(PromptName::instruction_generation).render(entity.surface);
  InstructionResult result;
  for (int attempt = 0; attempt < cfg.instruction_attempts; ++attempt) {
    ++result.attempts;
    const auto completions = services::text_generate(client, prompt, cfg.llm, 1,
                                                     derive_seed(seed, "instruction", std::to_string(attempt)));
    if (completions.empty()) {
      result.warnings.push_back("attempt " + std::to_string(attempt + 1) + ": no completion");
      continue;
    }
    try {
      auto question = parse_question(completions.front());
      if (leaks_entity(question, entity.surface)) {
        result.warnings.push_back("attempt " + std::to_string(attempt + 1) + ": question reveals the entity");
        continue;
      }
      result.instruction = std::move(question);
      return result;
    } catch (const ParseError& e) {
      result.warnings.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
    }
  }
  result.instruction = cfg.fixed_instruction;
  result.fallback = true;
  return result;
}

}  // namespace cvc::extract
