#include "cvc/core/serialize.hpp"

#include <fstream>
#include <sstream>

#include "cvc/core/errors.hpp"

namespace cvc {

void to_json(json& j, const Span& v) { j = json::array({v.begin, v.end}); }
void from_json(const json& j, Span& v) {
  v.begin = j.at(0).get<std::size_t>();
  v.end = j.at(1).get<std::size_t>();
}

void to_json(json& j, const Box& v) { j = json{{"x0", v.x0}, {"y0", v.y0}, {"x1", v.x1}, {"y1", v.y1}}; }
void from_json(const json& j, Box& v) {
  v.x0 = j.at("x0").get<int>();
  v.y0 = j.at("y0").get<int>();
  v.x1 = j.at("x1").get<int>();
  v.y1 = j.at("y1").get<int>();
}

void to_json(json& j, const ImageCaptionPair& v) {
  j = json{{"pair_id", v.pair_id}, {"image_ref", v.image_ref}, {"caption", v.caption}};
}
void from_json(const json& j, ImageCaptionPair& v) {
  j.at("pair_id").get_to(v.pair_id);
  j.at("image_ref").get_to(v.image_ref);
  j.at("caption").get_to(v.caption);
}

void to_json(json& j, const CandidateEntity& v) {
  j = json{{"surface", v.surface}, {"span", v.span}};
  j["causality_score"] = v.causality_score ? json(*v.causality_score) : json(nullptr);
}
void from_json(const json& j, CandidateEntity& v) {
  j.at("surface").get_to(v.surface);
  j.at("span").get_to(v.span);
  const auto& s = j.at("causality_score");
  v.causality_score = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
}

void to_json(json& j, const PatchCorner& v) { j = json::array({v.x, v.y}); }
void from_json(const json& j, PatchCorner& v) {
  v.x = j.at(0).get<int>();
  v.y = j.at(1).get<int>();
}

void to_json(json& j, const OcclusionMeta& v) {
  j = json{{"box", v.box},
           {"side", v.side},
           {"gap", v.gap},
           {"patches", v.patches},
           {"fill_rgb", json::array({v.fill_rgb[0], v.fill_rgb[1], v.fill_rgb[2]})},
           {"coverage", v.coverage},
           {"ground_score", v.ground_score}};
}
void from_json(const json& j, OcclusionMeta& v) {
  j.at("box").get_to(v.box);
  j.at("side").get_to(v.side);
  j.at("gap").get_to(v.gap);
  j.at("patches").get_to(v.patches);
  const auto& fill = j.at("fill_rgb");
  for (std::size_t i = 0; i < 3; ++i) v.fill_rgb[i] = fill.at(i).get<std::uint8_t>();
  j.at("coverage").get_to(v.coverage);
  j.at("ground_score").get_to(v.ground_score);
}

void to_json(json& j, const CVCInstance& v) {
  j = json{{"instance_id", v.instance_id},
           {"pair_id", v.pair_id},
           {"entity", v.entity},
           {"source_image_ref", v.source_image_ref},
           {"occluded_image_ref", v.occluded_image_ref},
           {"instruction", v.instruction},
           {"occlusion_meta", v.occlusion_meta}};
}
void from_json(const json& j, CVCInstance& v) {
  j.at("instance_id").get_to(v.instance_id);
  j.at("pair_id").get_to(v.pair_id);
  j.at("entity").get_to(v.entity);
  j.at("source_image_ref").get_to(v.source_image_ref);
  j.at("occluded_image_ref").get_to(v.occluded_image_ref);
  j.at("instruction").get_to(v.instruction);
  j.at("occlusion_meta").get_to(v.occlusion_meta);
}

void to_json(json& j, const Trial& v) {
  j = json{{"trial_index", v.trial_index},
           {"rationale", v.rationale},
           {"extracted_answers", v.extracted_answers},
           {"success", v.success},
           {"note", v.note}};
}
void from_json(const json& j, Trial& v) {
  j.at("trial_index").get_to(v.trial_index);
  j.at("rationale").get_to(v.rationale);
  j.at("extracted_answers").get_to(v.extracted_answers);
  j.at("success").get_to(v.success);
  j.at("note").get_to(v.note);
}

void to_json(json& j, const Difficulty& v) {
  j = json{{"failures", v.failures}, {"n", v.n}, {"value", v.value()}};
}
void from_json(const json& j, Difficulty& v) {
  j.at("failures").get_to(v.failures);
  j.at("n").get_to(v.n);
}

void to_json(json& j, const TrialSet& v) {
  j = json{{"instance_id", v.instance_id}, {"trials", v.trials}, {"difficulty", v.difficulty}};
  j["chosen_trial_index"] = v.chosen_trial_index ? json(*v.chosen_trial_index) : json(nullptr);
}
void from_json(const json& j, TrialSet& v) {
  j.at("instance_id").get_to(v.instance_id);
  j.at("trials").get_to(v.trials);
  j.at("difficulty").get_to(v.difficulty);
  const auto& c = j.at("chosen_trial_index");
  v.chosen_trial_index = c.is_null() ? std::nullopt : std::optional<int>(c.get<int>());
}

void to_json(json& j, const TrainingRecord& v) {
  j = json{{"record_id", v.record_id},
           {"image_ref", v.image_ref},
           {"human_turn", v.human_turn},
           {"model_turn", v.model_turn},
           {"kind", std::string(to_string(v.kind))}};
}
void from_json(const json& j, TrainingRecord& v) {
  j.at("record_id").get_to(v.record_id);
  j.at("image_ref").get_to(v.image_ref);
  j.at("human_turn").get_to(v.human_turn);
  j.at("model_turn").get_to(v.model_turn);
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "direct_answer") {
    v.kind = RecordKind::direct_answer;
  } else if (kind == "rationale") {
    v.kind = RecordKind::rationale;
  } else {
    throw Error("unknown record kind: " + kind);
  }
}

std::string canonical_dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string to_jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += canonical_dump(r);
    out.push_back('\n');
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  write_text_file(path, to_jsonl(records));
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace cvc
