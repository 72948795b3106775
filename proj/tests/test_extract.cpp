#include <doctest.h>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/extract/extract.hpp"
#include "cvc/extract/prompts.hpp"
#include "cvc/trials/trials.hpp"
#include "support.hpp"

using namespace cvc;
using namespace cvc::extract;
using nlohmann::json;

namespace {

std::vector<std::string> surfaces_of(const std::vector<EntityLine>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) out.push_back(l.without_modifiers);
  return out;
}

}  // namespace

TEST_CASE("bundled prompt templates match the pinned asset digests") {
  for (auto name : {PromptName::entity_extraction, PromptName::instruction_generation, PromptName::answer_extraction}) {
    const auto& tpl = prompt_template(name);
    const auto on_disk = read_text_file(test::assets_dir() / "prompts" / std::string(asset_file_name(name)));
    CHECK(tpl.text == on_disk);
  }
  // Any edit to a template must also update SHA256SUMS.
  const auto sums = read_text_file(test::assets_dir() / "prompts" / "SHA256SUMS");
  for (auto name : {PromptName::entity_extraction, PromptName::instruction_generation, PromptName::answer_extraction}) {
    const auto digest = sha256_hex(prompt_template(name).text);
    CHECK(sums.find(digest + "  " + std::string(asset_file_name(name))) != std::string::npos);
  }
}

TEST_CASE("templates render the input once at the end") {
  const auto prompt = prompt_template(PromptName::entity_extraction).render("A dog on a couch.");
  CHECK(prompt.starts_with("You are an entity extractor"));
  CHECK(prompt.ends_with("Text: A dog on a couch.\nExtracted entities:\n"));
  CHECK(prompt.find(kPromptSlot) == std::string::npos);
  CHECK(prompt_template(PromptName::instruction_generation).render("bush").ends_with("Entity: bush\n"));
}

TEST_CASE("entity extraction examples parse to the printed entities") {
  const auto doc = test::load_fixture("prompt_examples.json");
  for (const auto& ex : doc.at("entity_extraction")) {
    CAPTURE(ex.at("text").get<std::string>());
    const auto lines = parse_entity_block(ex.at("completion").get<std::string>());
    CHECK(surfaces_of(lines) == ex.at("expected").get<std::vector<std::string>>());
    // Every printed entity occurs in its caption.
    std::vector<std::string> dropped;
    const auto located = locate_entities(ex.at("text").get<std::string>(), lines, &dropped);
    CHECK(dropped.empty());
    CHECK(located.size() == lines.size());
  }
}

TEST_CASE("entity lines keep modifiers on the left") {
  const auto lines = parse_entity_block("<begin>\n1. male tennis player -> tennis player\n2. yellow train -> train\n<end>");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].with_modifiers == "male tennis player");
  CHECK(lines[0].without_modifiers == "tennis player");
  CHECK(lines[1].without_modifiers == "train");
}

TEST_CASE("malformed entity completions are parse errors") {
  CHECK_THROWS_AS(parse_entity_block("1. motorbike -> motorbike\n2. bush -> bush"), ParseError);
  CHECK_THROWS_AS(parse_entity_block("<begin>\n1. motorbike -> motorbike\n"), ParseError);
  CHECK_THROWS_AS(parse_entity_block("<begin>\nnothing here\n<end>"), ParseError);
}

TEST_CASE("entity location and dedup") {
  const std::string caption = "A motorbike parked on a roadside close to some bush.";
  CHECK(locate_surface(caption, "bush") == Span{47, 51});
  CHECK_FALSE(locate_surface(caption, "tiger").has_value());
  // Whole-word match preferred over an earlier substring hit.
  CHECK(locate_surface("a cart and a car", "car") == Span{13, 16});
  CHECK(locate_surface("Motorbike", "motorbike") == Span{0, 9});

  std::vector<std::string> dropped;
  const auto ents = locate_entities(caption, {{"motorbike", "motorbike"}, {"Motorbike", "Motorbike"}, {"tiger", "tiger"}, {"bush", "bush"}},
                                    &dropped);
  REQUIRE(ents.size() == 2);
  CHECK(ents[0].surface == "motorbike");
  CHECK(ents[1].surface == "bush");
  CHECK(dropped == std::vector<std::string>{"tiger"});
}

TEST_CASE("extract_entities through the mock extractor") {
  services::MockScript script;
  const std::string caption = "A motorbike parked on a roadside close to some bush.";
  script.script_text(prompt_template(PromptName::entity_extraction).render(caption),
                     {"<begin>\n1. motorbike -> motorbike\n2. bush -> bush\n<end>"});
  test::MockRig rig(script);
  const auto cfg = validate_config(json::object());
  const auto ents = extract_entities(*rig.client, {"p1", "img.png", caption}, cfg);
  REQUIRE(ents.size() == 2);
  CHECK(ents[0].surface == "motorbike");
  CHECK(ents[1].surface == "bush");

  const auto toy = extract_entities(*rig.client, {"p2", "img.png", "A scene with a red ball and a blue box."}, cfg);
  REQUIRE(toy.size() == 2);
  CHECK(toy[0].surface == "ball");
  CHECK(toy[1].surface == "box");
}

TEST_CASE("instruction examples parse to the printed questions") {
  const auto doc = test::load_fixture("prompt_examples.json");
  for (const auto& ex : doc.at("instruction_generation")) {
    CAPTURE(ex.at("entity").get<std::string>());
    const auto q = parse_question(ex.at("completion").get<std::string>());
    CHECK(q == ex.at("expected").get<std::string>());
  }
}

TEST_CASE("refrigerator yields the appliance question") {
  const auto doc = test::load_fixture("prompt_examples.json");
  const auto& ex = doc.at("instruction_generation").at(1);
  REQUIRE(ex.at("entity") == "refrigerator");
  services::MockScript script;
  script.script_text(prompt_template(PromptName::instruction_generation).render("refrigerator"),
                     {ex.at("completion").get<std::string>()});
  test::MockRig rig(script);
  const auto cfg = validate_config(json::object());
  const auto result = generate_instruction(*rig.client, {"refrigerator", {0, 12}, std::nullopt}, cfg, 1);
  CHECK_FALSE(result.fallback);
  CHECK(result.instruction.starts_with("In the given image, there is an appliance that is heavily occluded"));
  CHECK(result.attempts == 1);
}

TEST_CASE("leaking questions are retried then replaced by the fixed instruction") {
  services::MockScript script;
  script.script_text(prompt_template(PromptName::instruction_generation).render("refrigerator"),
                     {"<begin>\nQuestion: Is the hidden object a Refrigerator?\n<end>"});
  test::MockRig rig(script);
  const auto cfg = validate_config(json::object());
  const auto result = generate_instruction(*rig.client, {"refrigerator", {0, 12}, std::nullopt}, cfg, 1);
  CHECK(result.fallback);
  CHECK(result.instruction == "What is the occluded object?");
  CHECK(result.attempts == 3);
  CHECK(rig.transport->calls(ServiceKind::text_generate) == 3);
  CHECK_FALSE(result.warnings.empty());
}

TEST_CASE("empty completion falls back") {
  services::MockScript script;
  script.script_text(prompt_template(PromptName::instruction_generation).render("bush"), {""});
  test::MockRig rig(script);
  const auto cfg = validate_config(json::object());
  const auto result = generate_instruction(*rig.client, {"bush", {0, 4}, std::nullopt}, cfg, 9);
  CHECK(result.fallback);
  CHECK(result.instruction == cfg.fixed_instruction);
}

TEST_CASE("leak check is case-insensitive on the full surface") {
  CHECK(leaks_entity("What is the Sewing Machine?", "sewing machine"));
  CHECK_FALSE(leaks_entity("What kind of machine is it?", "sewing machine"));
}

TEST_CASE("answer extraction examples parse to the printed answers") {
  const auto doc = test::load_fixture("prompt_examples.json");
  for (const auto& ex : doc.at("answer_extraction")) {
    CAPTURE(ex.at("expected").dump());
    CHECK(trials::parse_extracted_answer(ex.at("completion").get<std::string>()) ==
          ex.at("expected").get<std::vector<std::string>>());
  }
  CHECK(trials::parse_extracted_answer("<begin>\nExtracted Answer: unknown\n<end>") ==
        std::vector<std::string>{"unknown"});
  CHECK(trials::parse_extracted_answer("<begin>\nExtracted Answer: Unknown, lamp\n<end>") ==
        std::vector<std::string>{"unknown"});
  CHECK_THROWS_AS(trials::parse_extracted_answer("Extracted Answer: lamp"), ParseError);
}
