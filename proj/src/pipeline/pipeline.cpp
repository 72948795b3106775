#include "cvc/pipeline/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "cvc/analysis/analysis.hpp"
#include "cvc/causality/causality.hpp"
#include "cvc/core/corpus.hpp"
#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/core/serialize.hpp"
#include "cvc/emit/emit.hpp"
#include "cvc/extract/extract.hpp"
#include "cvc/image/image.hpp"
#include "cvc/occlude/occlude.hpp"
#include "cvc/services/stage_runner.hpp"
#include "cvc/trials/trials.hpp"

namespace cvc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kSkipKey = "skipped";

std::string file_digest(const std::string& path) {
  if (path.empty()) return "";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return "missing:" + path;
  return sha256_hex(read_text_file(path));
}

json pick(const json& doc, std::initializer_list<const char*> keys) {
  json out = json::object();
  for (const char* key : keys) out[key] = doc.at(key);
  return out;
}

// Only the settings that can change a stage's outputs go into its digest, so
// e.g. moving alpha does not invalidate extraction. Referenced files count by
// content, which keeps digests independent of where the inputs live.
json stage_settings(Stage stage, const PipelineConfig& cfg) {
  const json all = to_json(cfg);
  const json backend = {{"use_mocks", cfg.use_mocks}, {"mock_script", file_digest(cfg.mock_script)}};
  json s;
  switch (stage) {
    case Stage::ingest:
      s = pick(all, {"captions_per_image"});
      s["captions"] = file_digest(cfg.captions_file);
      break;
    case Stage::extract:
      s = pick(all, {"llm"});
      s["seed"] = cfg.seeds.sampling;
      break;
    case Stage::score:
      s = pick(all, {"gamma", "mode"});
      s["seed"] = cfg.seeds.entity;
      break;
    case Stage::occlude:
      s = pick(all, {"fill_rgb", "patch_gap_ratio", "patch_jitter", "ground_score_floor"});
      s["seed"] = cfg.seeds.occlusion;
      break;
    case Stage::instruct:
      s = pick(all, {"llm", "instruction_attempts", "fixed_instruction"});
      s["seed"] = cfg.seeds.sampling;
      break;
    case Stage::trials:
      s = pick(all, {"n_trials", "sampling", "llm", "cot_prompt", "similarity_tau"});
      s["seed"] = cfg.seeds.sampling;
      break;
    case Stage::select:
      s = pick(all, {"alpha", "alpha_strict"});
      s["seed"] = cfg.seeds.selection;
      break;
    case Stage::emit:
      s = pick(all, {"emit_all_successful", "cot_prompt"});
      s["general_dataset"] = file_digest(cfg.general_dataset);
      s["seed"] = cfg.seeds.shuffle;
      break;
    case Stage::report:
      s = json::object();
      break;
  }
  if (stage != Stage::ingest && stage != Stage::select && stage != Stage::emit && stage != Stage::report) {
    s["backend"] = backend;
  }
  return s;
}

std::string digest_outputs(const std::string& records, const std::string& failures, const json& extra) {
  return sha256_hex(records + "\x1e" + failures + "\x1e" + canonical_dump(extra));
}

std::vector<json> read_records(const fs::path& dir) { return read_jsonl(dir / "records.jsonl"); }

json skip_record(const std::string& id, const InstanceSkipped& e) {
  return json{{"id", id}, {std::string(kSkipKey), true}, {"reason", e.reason()}, {"error", e.what()}};
}

bool is_skip(const json& j) { return j.is_object() && j.contains(kSkipKey); }

struct Split {
  std::vector<json> records;
  std::vector<json> failures;
  std::size_t skipped = 0;
};

// Flattens run_stage results (each a list of records or a skip marker) and
// failures into the on-disk record and failure lists, ordered by item id.
Split split(const services::StageOutcome<std::vector<json>>& outcome) {
  Split out;
  for (const auto& [id, results] : outcome.results) {
    for (const auto& r : results) {
      if (is_skip(r)) {
        out.failures.push_back(r);
        ++out.skipped;
      } else {
        out.records.push_back(r);
      }
    }
  }
  for (const auto& [id, message] : outcome.failures) {
    out.failures.push_back(json{{"id", id}, {"error", message}});
  }
  std::stable_sort(out.failures.begin(), out.failures.end(),
                   [](const json& a, const json& b) { return a.at("id").get<std::string>() < b.at("id").get<std::string>(); });
  return out;
}

template <typename Fn>
services::StageOutcome<std::vector<json>> run_items(const std::vector<json>& items, const std::string& id_key,
                                                    const PipelineConfig& cfg, Fn&& fn) {
  std::function<std::string(const json&)> id_of = [&](const json& item) { return item.at(id_key).get<std::string>(); };
  std::function<std::vector<json>(const json&)> worker = [&](const json& item) -> std::vector<json> {
    try {
      return fn(item);
    } catch (const InstanceSkipped& e) {
      return {skip_record(id_of(item), e)};
    }
  };
  return services::run_stage<json, std::vector<json>>(items, id_of, worker, cfg.concurrency, cfg.failure_cap);
}

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::extract: return "extract";
    case Stage::score: return "score";
    case Stage::occlude: return "occlude";
    case Stage::instruct: return "instruct";
    case Stage::trials: return "trials";
    case Stage::select: return "select";
    case Stage::emit: return "emit";
    case Stage::report: return "report";
  }
  return "unknown";
}

std::optional<Stage> stage_from_string(std::string_view name) {
  for (auto stage : kStageOrder) {
    if (to_string(stage) == name) return stage;
  }
  return std::nullopt;
}

std::vector<Stage> prerequisites(Stage stage) {
  switch (stage) {
    case Stage::ingest: return {};
    case Stage::extract: return {Stage::ingest};
    case Stage::score: return {Stage::ingest, Stage::extract};
    case Stage::occlude: return {Stage::ingest, Stage::score};
    case Stage::instruct: return {Stage::occlude};
    case Stage::trials: return {Stage::instruct, Stage::occlude};
    case Stage::select: return {Stage::trials};
    case Stage::emit: return {Stage::instruct, Stage::select};
    case Stage::report: return {Stage::instruct, Stage::trials, Stage::select, Stage::emit};
  }
  return {};
}

json StageManifest::to_json() const {
  return json{{"stage", stage},
              {"inputs", inputs},
              {"config_digest", config_digest},
              {"output_digest", output_digest},
              {"counts", {{"records", records}, {"failures", failures}, {"skipped", skipped}}},
              {"extra", extra}};
}

StageManifest StageManifest::from_json(const json& j) {
  StageManifest m;
  j.at("stage").get_to(m.stage);
  j.at("inputs").get_to(m.inputs);
  j.at("config_digest").get_to(m.config_digest);
  j.at("output_digest").get_to(m.output_digest);
  const auto& counts = j.at("counts");
  counts.at("records").get_to(m.records);
  counts.at("failures").get_to(m.failures);
  counts.at("skipped").get_to(m.skipped);
  m.extra = j.value("extra", json::object());
  return m;
}

ServiceBundle make_services(const PipelineConfig& cfg) {
  ServiceBundle bundle;
  auto cache = cfg.cache_dir.empty() ? std::make_shared<services::ResponseCache>()
                                     : std::make_shared<services::ResponseCache>(cfg.cache_dir);
  std::shared_ptr<services::Transport> transport;
  auto endpoints = cfg.endpoints;
  if (cfg.use_mocks) {
    auto script = cfg.mock_script.empty() ? services::MockScript{} : services::MockScript::load(cfg.mock_script);
    bundle.mock = std::make_shared<services::MockTransport>(
        std::make_shared<const services::MockServices>(std::move(script)));
    transport = bundle.mock;
    for (auto kind : kAllServiceKinds) endpoints.try_emplace(kind, "mock://local");
  } else {
    for (auto kind : kAllServiceKinds) {
      if (!endpoints.contains(kind)) {
        throw ConfigError("services." + std::string(cvc::to_string(kind)),
                          "no endpoint configured for service " + std::string(cvc::to_string(kind)));
      }
    }
    transport = std::make_shared<services::HttpTransport>();
  }
  bundle.client = std::make_shared<services::ServiceClient>(transport, endpoints, cache, cfg.retry);
  return bundle;
}

std::string make_instance_id(std::string_view pair_id, std::string_view surface) {
  return std::string(pair_id) + "-" + sha256_hex(to_lower(surface)).substr(0, 12);
}

Pipeline::Pipeline(PipelineConfig cfg, fs::path workdir, std::shared_ptr<services::ServiceClient> client)
    : cfg_(std::move(cfg)), workdir_(std::move(workdir)), client_(std::move(client)) {}

std::string Pipeline::config_digest() const { return sha256_hex(canonical_dump(to_json(cfg_))); }

std::optional<StageManifest> Pipeline::manifest(Stage stage) const {
  const auto path = stage_dir(stage) / "manifest.json";
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  try {
    return StageManifest::from_json(json::parse(read_text_file(path)));
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable manifest {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

std::string Pipeline::output_digest(Stage stage) const {
  const auto dir = stage_dir(stage);
  std::error_code ec;
  if (!fs::is_regular_file(dir / "records.jsonl", ec) || !fs::is_regular_file(dir / "failures.jsonl", ec)) return "";
  json extra = json::object();
  if (stage == Stage::emit) {
    if (!fs::is_regular_file(dir / "dataset.json", ec)) return "";
    extra["dataset"] = sha256_hex(read_text_file(dir / "dataset.json"));
  } else if (stage == Stage::report) {
    for (const char* name : {"report.json", "summary.txt", "difficulty.csv"}) {
      if (!fs::is_regular_file(dir / name, ec)) return "";
      extra[name] = sha256_hex(read_text_file(dir / name));
    }
  } else if (stage == Stage::occlude) {
    // The occluded images are outputs too; their digests live in the records.
    for (const auto& r : read_records(dir)) {
      const auto path = workdir_ / r.at("occluded_image_ref").get<std::string>();
      if (!fs::is_regular_file(path, ec)) return "";
      if (sha256_hex(read_file_bytes(path)) != r.at("occluded_sha256").get<std::string>()) return "";
    }
  }
  return digest_outputs(read_text_file(dir / "records.jsonl"), read_text_file(dir / "failures.jsonl"), extra);
}

StageRun Pipeline::run(Stage stage) {
  const auto name = std::string(to_string(stage));
  std::map<std::string, std::string> inputs;
  for (auto pre : prerequisites(stage)) {
    auto m = manifest(pre);
    if (!m) throw StageError("missing stage output: " + std::string(to_string(pre)));
    inputs[std::string(to_string(pre))] = m->output_digest;
  }
  const auto settings_digest = sha256_hex(canonical_dump(stage_settings(stage, cfg_)));

  if (auto previous = manifest(stage)) {
    if (previous->inputs == inputs && previous->config_digest == settings_digest &&
        output_digest(stage) == previous->output_digest) {
      spdlog::info("stage {}: up to date ({} records)", name, previous->records);
      return {*previous, true};
    }
  }

  spdlog::info("stage {}: running", name);
  Output out;
  switch (stage) {
    case Stage::ingest: out = run_ingest(); break;
    case Stage::extract: out = run_extract(); break;
    case Stage::score: out = run_score(); break;
    case Stage::occlude: out = run_occlude(); break;
    case Stage::instruct: out = run_instruct(); break;
    case Stage::trials: out = run_trials(); break;
    case Stage::select: out = run_select(); break;
    case Stage::emit: out = run_emit(); break;
    case Stage::report: out = run_report(); break;
  }

  const auto dir = stage_dir(stage);
  write_jsonl(dir / "records.jsonl", out.records);
  write_jsonl(dir / "failures.jsonl", out.failures);

  StageManifest m;
  m.stage = name;
  m.inputs = std::move(inputs);
  m.config_digest = settings_digest;
  m.output_digest = output_digest(stage);
  m.records = out.records.size();
  m.failures = out.failures.size() - out.skipped;
  m.skipped = out.skipped;
  m.extra = std::move(out.extra);
  // The manifest goes last, so an interrupted stage is rerun in full.
  write_text_file(dir / "manifest.json", m.to_json().dump(2) + "\n");
  spdlog::info("stage {}: {} records, {} failures, {} skipped", name, m.records, m.failures, m.skipped);
  return {m, false};
}

std::vector<StageRun> Pipeline::run_all() {
  std::vector<StageRun> runs;
  for (auto stage : kStageOrder) runs.push_back(run(stage));
  return runs;
}

Pipeline::Output Pipeline::run_ingest() {
  Output out;
  const auto pairs = load_corpus(cfg_.captions_file, cfg_.image_root, cfg_);
  out.records = to_json_lines(pairs);
  return out;
}

Pipeline::Output Pipeline::run_extract() {
  const auto pairs = read_records(stage_dir(Stage::ingest));
  auto outcome = run_items(pairs, "pair_id", cfg_, [&](const json& item) -> std::vector<json> {
    const auto pair = item.get<ImageCaptionPair>();
    auto entities = extract::extract_entities(*client_, pair, cfg_);
    return {json{{"pair_id", pair.pair_id}, {"entities", entities}}};
  });
  auto s = split(outcome);
  return {std::move(s.records), std::move(s.failures), s.skipped};
}

Pipeline::Output Pipeline::run_score() {
  std::map<std::string, std::string> captions;
  for (const auto& p : read_records(stage_dir(Stage::ingest))) {
    captions[p.at("pair_id").get<std::string>()] = p.at("caption").get<std::string>();
  }
  const auto extracted = read_records(stage_dir(Stage::extract));
  const bool causal = cfg_.mode == EntityMode::causal;

  auto outcome = run_items(extracted, "pair_id", cfg_, [&](const json& item) -> std::vector<json> {
    const auto pair_id = item.at("pair_id").get<std::string>();
    const auto& caption = captions.at(pair_id);
    auto entities = item.at("entities").get<std::vector<CandidateEntity>>();
    std::vector<std::vector<double>> log_probs(entities.size());
    if (causal) {
      for (std::size_t i = 0; i < entities.size(); ++i) {
        const auto masked = causality::mask_entity(caption, entities[i]);
        auto scored = causality::score_entity(*client_, masked, entities[i]);
        entities[i] = std::move(scored.entity);
        log_probs[i] = std::move(scored.log_probs);
      }
    }
    const auto kept = causality::filter_entities(entities, cfg_, pair_id);
    std::vector<json> rows;
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const bool retained = std::find(kept.begin(), kept.end(), entities[i]) != kept.end();
      rows.push_back(json{{"pair_id", pair_id},
                          {"surface", entities[i].surface},
                          {"span", entities[i].span},
                          {"score", entities[i].causality_score ? json(*entities[i].causality_score) : json(nullptr)},
                          {"log_probs", log_probs[i]},
                          {"retained", retained}});
    }
    return rows;
  });
  auto s = split(outcome);
  Output out{std::move(s.records), std::move(s.failures), s.skipped};
  std::size_t retained = 0;
  for (const auto& r : out.records) retained += r.at("retained").get<bool>() ? 1 : 0;
  out.extra["retained"] = retained;
  return out;
}

Pipeline::Output Pipeline::run_occlude() {
  std::map<std::string, std::string> image_refs;
  for (const auto& p : read_records(stage_dir(Stage::ingest))) {
    image_refs[p.at("pair_id").get<std::string>()] = p.at("image_ref").get<std::string>();
  }
  std::vector<json> items;
  for (const auto& r : read_records(stage_dir(Stage::score))) {
    if (!r.at("retained").get<bool>()) continue;
    auto item = r;
    item["instance_id"] = make_instance_id(r.at("pair_id").get<std::string>(), r.at("surface").get<std::string>());
    items.push_back(std::move(item));
  }
  fs::create_directories(workdir_ / "occluded");

  auto outcome = run_items(items, "instance_id", cfg_, [&](const json& item) -> std::vector<json> {
    const auto instance_id = item.at("instance_id").get<std::string>();
    const auto pair_id = item.at("pair_id").get<std::string>();
    CandidateEntity entity{item.at("surface").get<std::string>(), item.at("span").get<Span>(), std::nullopt};
    if (!item.at("score").is_null()) entity.causality_score = item.at("score").get<double>();

    const auto& source_ref = image_refs.at(pair_id);
    const auto source = load_image(source_ref);
    const auto png = encode_png(source);
    const auto object = occlude::ground_entity(*client_, png, source.width(), source.height(), entity.surface, cfg_);
    const auto plan = occlude::plan_patches(object, cfg_, derive_seed(cfg_.seeds.occlusion, "patches", instance_id));
    const auto occluded = occlude::apply_occlusion(source, plan);

    const auto rel = "occluded/" + instance_id + ".png";
    const auto bytes = encode_png(occluded);
    write_file_bytes(workdir_ / rel, bytes);

    OcclusionMeta meta{object.box, plan.side, plan.gap, plan.patches, plan.fill_rgb, plan.coverage,
                       object.ground_score};
    return {json{{"instance_id", instance_id},
                 {"pair_id", pair_id},
                 {"entity", entity},
                 {"source_image_ref", source_ref},
                 {"occluded_image_ref", rel},
                 {"occlusion_meta", meta},
                 {"occluded_sha256", sha256_hex(bytes)}}};
  });
  auto s = split(outcome);
  return {std::move(s.records), std::move(s.failures), s.skipped};
}

Pipeline::Output Pipeline::run_instruct() {
  const auto items = read_records(stage_dir(Stage::occlude));
  auto outcome = run_items(items, "instance_id", cfg_, [&](const json& item) -> std::vector<json> {
    const auto instance_id = item.at("instance_id").get<std::string>();
    const auto entity = item.at("entity").get<CandidateEntity>();
    const auto result = extract::generate_instruction(*client_, entity, cfg_,
                                                      derive_seed(cfg_.seeds.sampling, "instruction", instance_id));
    CVCInstance instance{instance_id,
                         item.at("pair_id").get<std::string>(),
                         entity,
                         item.at("source_image_ref").get<std::string>(),
                         item.at("occluded_image_ref").get<std::string>(),
                         result.instruction,
                         item.at("occlusion_meta").get<OcclusionMeta>()};
    json row = instance;
    row["instruction_fallback"] = result.fallback;
    row["instruction_attempts"] = result.attempts;
    row["warnings"] = result.warnings;
    return {row};
  });
  auto s = split(outcome);
  Output out{std::move(s.records), std::move(s.failures), s.skipped};
  std::size_t fallbacks = 0;
  for (const auto& r : out.records) fallbacks += r.at("instruction_fallback").get<bool>() ? 1 : 0;
  out.extra["instruction_fallbacks"] = fallbacks;
  return out;
}

Pipeline::Output Pipeline::run_trials() {
  const auto items = read_records(stage_dir(Stage::instruct));
  auto outcome = run_items(items, "instance_id", cfg_, [&](const json& item) -> std::vector<json> {
    const auto instance = item.get<CVCInstance>();
    const auto png = read_file_bytes(workdir_ / instance.occluded_image_ref);
    const auto rationales = trials::sample_trials(*client_, png, instance, cfg_);
    return {json(trials::judge_trials(*client_, instance, rationales, cfg_))};
  });
  auto s = split(outcome);
  return {std::move(s.records), std::move(s.failures), s.skipped};
}

Pipeline::Output Pipeline::run_select() {
  const auto sets = from_json_lines<TrialSet>(read_records(stage_dir(Stage::trials)));
  Output out;
  out.records = to_json_lines(trials::select_instances(sets, cfg_));
  out.extra["candidates"] = sets.size();
  return out;
}

Pipeline::Output Pipeline::run_emit() {
  std::map<std::string, CVCInstance> instances;
  for (const auto& r : read_records(stage_dir(Stage::instruct))) {
    auto instance = r.get<CVCInstance>();
    instances.emplace(instance.instance_id, std::move(instance));
  }
  const auto selected = from_json_lines<TrialSet>(read_records(stage_dir(Stage::select)));

  Output out;
  std::vector<json> conversations;
  for (const auto& set : selected) {
    const auto it = instances.find(set.instance_id);
    if (it == instances.end()) throw ContractViolation("selected instance has no CVC record: " + set.instance_id);
    for (const auto& record : emit::to_records(it->second, set, cfg_)) {
      out.records.emplace_back(record);
      conversations.push_back(emit::to_conversation(record));
    }
  }
  std::vector<json> general;
  if (!cfg_.general_dataset.empty()) general = emit::read_general_dataset(cfg_.general_dataset);
  const auto cvc_count = conversations.size();
  const auto mixed = emit::mix_with_general(std::move(conversations), general, derive_seed(cfg_.seeds.shuffle, "mix"));
  const auto manifest = emit::write_dataset(mixed, stage_dir(Stage::emit) / "dataset.json");
  out.extra = json{{"dataset_count", manifest.count},
                   {"dataset_sha256", manifest.digest},
                   {"cvc_records", cvc_count},
                   {"general_records", general.size()}};
  return out;
}

Pipeline::Output Pipeline::run_report() {
  const auto instances = from_json_lines<CVCInstance>(read_records(stage_dir(Stage::instruct)));
  const auto sets = from_json_lines<TrialSet>(read_records(stage_dir(Stage::trials)));
  const auto selected = from_json_lines<TrialSet>(read_records(stage_dir(Stage::select)));
  const auto emitted = read_records(stage_dir(Stage::emit)).size();

  const auto report = analysis::build_report(instances, sets, selected, emitted);
  const auto dir = stage_dir(Stage::report);
  write_text_file(dir / "report.json", report.document.dump(2) + "\n");
  write_text_file(dir / "summary.txt", report.summary);
  write_text_file(dir / "difficulty.csv", analysis::difficulty_histogram(sets).to_csv());

  Output out;
  out.records.push_back(report.document);
  return out;
}

}  // namespace cvc::pipeline
