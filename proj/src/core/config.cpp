#include "cvc/core/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"

namespace cvc {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      const std::string field = where.empty() ? key : where + "." + key;
      throw ConfigError(field, "unknown config field: " + field);
    }
  }
}

double read_real(const json& obj, const std::string& key, const std::string& field, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(field, field + " must be a number");
  return v.get<double>();
}

long long read_int(const json& obj, const std::string& key, const std::string& field, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(field, field + " must be an integer");
  return v.get<long long>();
}

std::uint64_t read_seed(const json& obj, const std::string& key, const std::string& field,
                        std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(field, field + " must be a non-negative integer");
}

bool read_bool(const json& obj, const std::string& key, const std::string& field, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(field, field + " must be a boolean");
  return v.get<bool>();
}

std::string read_string(const json& obj, const std::string& key, const std::string& field,
                        const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(field, field + " must be a string");
  return v.get<std::string>();
}

void require_unit(double v, const std::string& field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(field, field + " out of [0,1]");
}

SamplingParams read_sampling(const json& raw, const std::string& key, SamplingParams s) {
  if (!raw.contains(key)) return s;
  const auto& obj = raw.at(key);
  check_keys(obj, key, {"temperature", "top_p", "max_tokens"});
  s.temperature = read_real(obj, "temperature", key + ".temperature", s.temperature);
  s.top_p = read_real(obj, "top_p", key + ".top_p", s.top_p);
  s.max_tokens = static_cast<int>(read_int(obj, "max_tokens", key + ".max_tokens", s.max_tokens));
  if (s.temperature < 0.0) throw ConfigError(key + ".temperature", key + ".temperature must be >= 0");
  if (!(s.top_p > 0.0 && s.top_p <= 1.0)) throw ConfigError(key + ".top_p", key + ".top_p out of (0,1]");
  if (s.max_tokens < 1) throw ConfigError(key + ".max_tokens", key + ".max_tokens must be >= 1");
  return s;
}

}  // namespace

std::string_view to_string(EntityMode mode) {
  return mode == EntityMode::causal ? "causal" : "random_entity";
}

PipelineConfig validate_config(const json& raw_in) {
  const json raw = raw_in.is_null() ? json::object() : raw_in;
  check_keys(raw, "",
             {"gamma", "n_trials", "alpha", "alpha_strict", "similarity_tau", "sampling", "llm",
              "cot_prompt", "fixed_instruction", "fill_rgb", "patch_gap_ratio", "patch_jitter",
              "ground_score_floor", "mode", "captions_per_image", "seed", "seeds", "services",
              "use_mocks", "mock_script", "retry", "concurrency", "failure_cap",
              "instruction_attempts", "emit_all_successful", "corpus", "general_dataset",
              "cache_dir"});

  PipelineConfig cfg;
  cfg.gamma = read_real(raw, "gamma", "gamma", cfg.gamma);
  require_unit(cfg.gamma, "gamma");
  cfg.alpha = read_real(raw, "alpha", "alpha", cfg.alpha);
  require_unit(cfg.alpha, "alpha");
  cfg.alpha_strict = read_bool(raw, "alpha_strict", "alpha_strict", cfg.alpha_strict);
  cfg.similarity_tau = read_real(raw, "similarity_tau", "similarity_tau", cfg.similarity_tau);
  require_unit(cfg.similarity_tau, "similarity_tau");

  const auto n = read_int(raw, "n_trials", "n_trials", cfg.n_trials);
  if (n < 1) throw ConfigError("n_trials", "n_trials must be >= 1");
  cfg.n_trials = static_cast<int>(n);

  cfg.sampling = read_sampling(raw, "sampling", cfg.sampling);
  cfg.llm = read_sampling(raw, "llm", cfg.llm);

  cfg.cot_prompt = read_string(raw, "cot_prompt", "cot_prompt", cfg.cot_prompt);
  if (cfg.cot_prompt.empty()) throw ConfigError("cot_prompt", "cot_prompt must be non-empty");
  cfg.fixed_instruction = read_string(raw, "fixed_instruction", "fixed_instruction", cfg.fixed_instruction);
  if (cfg.fixed_instruction.empty()) {
    throw ConfigError("fixed_instruction", "fixed_instruction must be non-empty");
  }

  if (raw.contains("fill_rgb")) {
    const auto& v = raw.at("fill_rgb");
    if (!v.is_array() || v.size() != 3) throw ConfigError("fill_rgb", "fill_rgb must be [r,g,b]");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!v[i].is_number_integer() || v[i].get<int>() < 0 || v[i].get<int>() > 255) {
        throw ConfigError("fill_rgb", "fill_rgb channels must be integers in [0,255]");
      }
      cfg.fill_rgb[i] = static_cast<std::uint8_t>(v[i].get<int>());
    }
  }
  cfg.patch_gap_ratio = read_real(raw, "patch_gap_ratio", "patch_gap_ratio", cfg.patch_gap_ratio);
  if (cfg.patch_gap_ratio < 0.0) throw ConfigError("patch_gap_ratio", "patch_gap_ratio must be >= 0");
  cfg.patch_jitter = read_bool(raw, "patch_jitter", "patch_jitter", cfg.patch_jitter);
  cfg.ground_score_floor = read_real(raw, "ground_score_floor", "ground_score_floor", cfg.ground_score_floor);
  require_unit(cfg.ground_score_floor, "ground_score_floor");

  const auto mode = read_string(raw, "mode", "mode", "causal");
  if (mode == "causal") {
    cfg.mode = EntityMode::causal;
  } else if (mode == "random_entity") {
    cfg.mode = EntityMode::random_entity;
  } else {
    throw ConfigError("mode", "unknown mode: " + mode);
  }
  const auto captions = read_string(raw, "captions_per_image", "captions_per_image", "first");
  if (captions == "first") {
    cfg.captions_per_image = CaptionSelection::first;
  } else if (captions == "all") {
    cfg.captions_per_image = CaptionSelection::all;
  } else {
    throw ConfigError("captions_per_image", "captions_per_image must be first or all");
  }

  cfg.seeds.master = read_seed(raw, "seed", "seed", 0);
  json seeds = raw.value("seeds", json::object());
  check_keys(seeds, "seeds", {"sampling", "selection", "occlusion", "shuffle", "entity"});
  auto seed_of = [&](const char* name) {
    return read_seed(seeds, name, std::string("seeds.") + name, derive_seed(cfg.seeds.master, name));
  };
  cfg.seeds.sampling = seed_of("sampling");
  cfg.seeds.selection = seed_of("selection");
  cfg.seeds.occlusion = seed_of("occlusion");
  cfg.seeds.shuffle = seed_of("shuffle");
  cfg.seeds.entity = seed_of("entity");

  if (raw.contains("services")) {
    const auto& services = raw.at("services");
    if (!services.is_object()) throw ConfigError("services", "services must be an object");
    for (const auto& [key, value] : services.items()) {
      ServiceKind kind{};
      try {
        kind = service_kind_from_string(key);
      } catch (const Error&) {
        throw ConfigError("services." + key, "unknown config field: services." + key);
      }
      if (!value.is_string()) throw ConfigError("services." + key, "services." + key + " must be a URL string");
      cfg.endpoints[kind] = value.get<std::string>();
    }
  }
  cfg.use_mocks = read_bool(raw, "use_mocks", "use_mocks", cfg.use_mocks);
  cfg.mock_script = read_string(raw, "mock_script", "mock_script", cfg.mock_script);

  if (raw.contains("retry")) {
    const auto& r = raw.at("retry");
    check_keys(r, "retry", {"attempts", "backoff_ms", "growth"});
    cfg.retry.attempts = static_cast<int>(read_int(r, "attempts", "retry.attempts", cfg.retry.attempts));
    cfg.retry.backoff_ms = static_cast<int>(read_int(r, "backoff_ms", "retry.backoff_ms", cfg.retry.backoff_ms));
    cfg.retry.growth = read_real(r, "growth", "retry.growth", cfg.retry.growth);
    if (cfg.retry.attempts < 1) throw ConfigError("retry.attempts", "retry.attempts must be >= 1");
    if (cfg.retry.backoff_ms < 0) throw ConfigError("retry.backoff_ms", "retry.backoff_ms must be >= 0");
    if (cfg.retry.growth < 1.0) throw ConfigError("retry.growth", "retry.growth must be >= 1");
  }

  const auto conc = read_int(raw, "concurrency", "concurrency", cfg.concurrency);
  if (conc < 1) throw ConfigError("concurrency", "concurrency must be >= 1");
  cfg.concurrency = static_cast<int>(conc);
  cfg.failure_cap = read_real(raw, "failure_cap", "failure_cap", cfg.failure_cap);
  require_unit(cfg.failure_cap, "failure_cap");
  const auto attempts = read_int(raw, "instruction_attempts", "instruction_attempts", cfg.instruction_attempts);
  if (attempts < 1) throw ConfigError("instruction_attempts", "instruction_attempts must be >= 1");
  cfg.instruction_attempts = static_cast<int>(attempts);
  cfg.emit_all_successful = read_bool(raw, "emit_all_successful", "emit_all_successful", cfg.emit_all_successful);

  if (raw.contains("corpus")) {
    const auto& c = raw.at("corpus");
    check_keys(c, "corpus", {"captions", "image_root"});
    cfg.captions_file = read_string(c, "captions", "corpus.captions", "");
    cfg.image_root = read_string(c, "image_root", "corpus.image_root", "");
  }
  cfg.general_dataset = read_string(raw, "general_dataset", "general_dataset", "");
  cfg.cache_dir = read_string(raw, "cache_dir", "cache_dir", "");
  return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file: " + path);
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("config file is not valid JSON: ") + e.what());
  }
  auto cfg = validate_config(raw);
  // Paths inside a config file are relative to the file, not the caller.
  const auto base = std::filesystem::absolute(path).parent_path();
  for (std::string* field : {&cfg.captions_file, &cfg.image_root, &cfg.mock_script, &cfg.general_dataset,
                             &cfg.cache_dir}) {
    if (!field->empty() && std::filesystem::path(*field).is_relative()) *field = (base / *field).lexically_normal().string();
  }
  return cfg;
}

void apply_env_overrides(PipelineConfig& cfg,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  for (auto kind : kAllServiceKinds) {
    std::string name = "CVC_";
    for (char c : to_string(kind)) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    name += "_URL";
    if (auto value = getenv(name); value && !value->empty()) cfg.endpoints[kind] = *value;
  }
}

void apply_env_overrides(PipelineConfig& cfg) {
  apply_env_overrides(cfg, [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  });
}

json to_json(const PipelineConfig& cfg) {
  json services = json::object();
  for (const auto& [kind, url] : cfg.endpoints) services[std::string(to_string(kind))] = url;
  auto sampling = [](const SamplingParams& s) {
    return json{{"temperature", s.temperature}, {"top_p", s.top_p}, {"max_tokens", s.max_tokens}};
  };
  return json{
      {"gamma", cfg.gamma},
      {"n_trials", cfg.n_trials},
      {"alpha", cfg.alpha},
      {"alpha_strict", cfg.alpha_strict},
      {"similarity_tau", cfg.similarity_tau},
      {"sampling", sampling(cfg.sampling)},
      {"llm", sampling(cfg.llm)},
      {"cot_prompt", cfg.cot_prompt},
      {"fixed_instruction", cfg.fixed_instruction},
      {"fill_rgb", {cfg.fill_rgb[0], cfg.fill_rgb[1], cfg.fill_rgb[2]}},
      {"patch_gap_ratio", cfg.patch_gap_ratio},
      {"patch_jitter", cfg.patch_jitter},
      {"ground_score_floor", cfg.ground_score_floor},
      {"mode", std::string(to_string(cfg.mode))},
      {"captions_per_image", cfg.captions_per_image == CaptionSelection::first ? "first" : "all"},
      {"seed", cfg.seeds.master},
      {"seeds",
       {{"sampling", cfg.seeds.sampling},
        {"selection", cfg.seeds.selection},
        {"occlusion", cfg.seeds.occlusion},
        {"shuffle", cfg.seeds.shuffle},
        {"entity", cfg.seeds.entity}}},
      {"services", services},
      {"use_mocks", cfg.use_mocks},
      {"mock_script", cfg.mock_script},
      {"retry", {{"attempts", cfg.retry.attempts}, {"backoff_ms", cfg.retry.backoff_ms}, {"growth", cfg.retry.growth}}},
      {"concurrency", cfg.concurrency},
      {"failure_cap", cfg.failure_cap},
      {"instruction_attempts", cfg.instruction_attempts},
      {"emit_all_successful", cfg.emit_all_successful},
      {"corpus", {{"captions", cfg.captions_file}, {"image_root", cfg.image_root}}},
      {"general_dataset", cfg.general_dataset},
      {"cache_dir", cfg.cache_dir},
  };
}

}  // namespace cvc
