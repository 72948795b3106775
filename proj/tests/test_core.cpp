#include <doctest.h>

#include <set>

#include "cvc/core/config.hpp"
#include "cvc/core/corpus.hpp"
#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/core/serialize.hpp"
#include "cvc/image/image.hpp"
#include "support.hpp"

using namespace cvc;
using nlohmann::json;

namespace {

std::string config_error_field(const json& doc) {
  try {
    validate_config(doc);
  } catch (const ConfigError& e) {
    return e.field() + ": " + e.what();
  }
  return "";
}

void write_corpus(const test::TempDir& dir, const json& doc, int images = 2) {
  std::filesystem::create_directories(dir / "images");
  for (int i = 1; i <= images; ++i) {
    save_png(dir / ("images/im" + std::to_string(i) + ".png"), Image(4, 4, {10, 20, 30}));
  }
  write_text_file(dir / "captions.json", doc.dump());
}

json five_captions_each() {
  json doc{{"images", json::array()}, {"annotations", json::array()}};
  for (int i = 1; i <= 2; ++i) {
    doc["images"].push_back({{"id", i}, {"file_name", "im" + std::to_string(i) + ".png"}});
    for (int k = 0; k < 5; ++k) {
      // Annotation ids deliberately out of order within an image.
      const int ann = i * 100 + (4 - k);
      doc["annotations"].push_back(
          {{"id", ann}, {"image_id", i}, {"caption", "caption " + std::to_string(ann)}});
    }
  }
  return doc;
}

}  // namespace

TEST_CASE("empty config yields the published defaults") {
  const auto cfg = validate_config(json::object());
  CHECK(cfg.gamma == 0.3);
  CHECK(cfg.n_trials == 16);
  CHECK(cfg.alpha == 0.75);
  CHECK(cfg.alpha_strict);
  CHECK(cfg.similarity_tau == 0.8);
  CHECK(cfg.cot_prompt == "Let's think step by step");
  CHECK(cfg.fixed_instruction == "What is the occluded object?");
  CHECK(cfg.mode == EntityMode::causal);
  CHECK(cfg.fill_rgb == Rgb{124, 116, 104});
  CHECK(cfg.retry.attempts == 3);
  CHECK(cfg.retry.backoff_ms == 250);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error_field({{"alpha", 1.5}}) == "alpha: alpha out of [0,1]");
  CHECK(config_error_field({{"gamma", -0.1}}) == "gamma: gamma out of [0,1]");
  CHECK(config_error_field({{"n_trials", 0}}) == "n_trials: n_trials must be >= 1");
  CHECK(config_error_field({{"mode", "sometimes"}}) == "mode: unknown mode: sometimes");
  CHECK(config_error_field({{"gama", 0.3}}) == "gama: unknown config field: gama");
  CHECK(config_error_field({{"services", {{"mlm", "http://x"}}}}).starts_with("services.mlm:"));
}

TEST_CASE("n_trials = 1 is a valid boundary") {
  const auto cfg = validate_config({{"n_trials", 1}});
  CHECK(cfg.n_trials == 1);
  CHECK(cfg.gamma == 0.3);
}

TEST_CASE("config round-trips through its canonical document") {
  const auto cfg = validate_config({{"seed", 42}, {"alpha", 0.5}, {"mode", "random_entity"}});
  const auto again = validate_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
  CHECK(again.seeds.selection == derive_seed(42, "selection"));
}

TEST_CASE("explicit sub-seeds override the derived ones") {
  const auto a = validate_config({{"seed", 1}});
  const auto b = validate_config({{"seed", 1}, {"seeds", {{"selection", 99}}}});
  CHECK(b.seeds.selection == 99);
  CHECK(b.seeds.sampling == a.seeds.sampling);
}

TEST_CASE("endpoint environment overrides") {
  auto cfg = validate_config(json::object());
  apply_env_overrides(cfg, [](const std::string& name) -> std::optional<std::string> {
    if (name == "CVC_MLM_SCORE_URL") return "http://mlm:9000";
    return std::nullopt;
  });
  CHECK(cfg.endpoints.at(ServiceKind::mlm_score) == "http://mlm:9000");
  CHECK_FALSE(cfg.endpoints.contains(ServiceKind::ground));
}

TEST_CASE("config file paths resolve against the file") {
  test::TempDir dir("cfg");
  write_text_file(dir / "sub/config.json", json{{"corpus", {{"captions", "c.json"}}}}.dump());
  const auto cfg = load_config_file((dir / "sub/config.json").string());
  CHECK(std::filesystem::path(cfg.captions_file) == (dir / "sub/c.json").lexically_normal());
  CHECK_THROWS_AS(load_config_file((dir / "nope.json").string()), ConfigError);
}

TEST_CASE("corpus caption selection") {
  test::TempDir dir("corpus");
  write_corpus(dir, five_captions_each());
  auto cfg = validate_config(json::object());

  const auto first = load_corpus(dir / "captions.json", dir / "images", cfg);
  REQUIRE(first.size() == 2);
  CHECK(first[0].pair_id == "img1-ann100");  // lowest annotation id wins
  CHECK(first[1].pair_id == "img2-ann200");
  CHECK(first[0].caption == "caption 100");

  cfg.captions_per_image = CaptionSelection::all;
  const auto all = load_corpus(dir / "captions.json", dir / "images", cfg);
  CHECK(all.size() == 10);
  std::set<std::string> ids;
  for (const auto& p : all) ids.insert(p.pair_id);
  CHECK(ids.size() == 10);
}

TEST_CASE("corpus ingestion errors are distinct") {
  test::TempDir dir("corpus-err");
  const auto cfg = validate_config(json::object());
  auto kind_of = [&](const json& doc) {
    write_corpus(dir, doc);
    try {
      load_corpus(dir / "captions.json", dir / "images", cfg);
    } catch (const IngestError& e) {
      return std::make_pair(e.kind(), std::string(e.what()));
    }
    return std::make_pair(IngestError::Kind::schema, std::string("no error"));
  };

  auto doc = five_captions_each();
  doc["annotations"].push_back({{"id", 777}, {"image_id", 9}, {"caption", "orphan"}});
  const auto [k1, m1] = kind_of(doc);
  CHECK(k1 == IngestError::Kind::bad_reference);
  CHECK(m1.find("annotation 777") != std::string::npos);

  doc = five_captions_each();
  doc["images"].push_back({{"id", 3}, {"file_name", "missing.png"}});
  doc["annotations"].push_back({{"id", 300}, {"image_id", 3}, {"caption", "a thing"}});
  CHECK(kind_of(doc).first == IngestError::Kind::unresolved_image);

  CHECK(kind_of({{"images", json::array()}, {"annotations", json::array()}}).first == IngestError::Kind::no_pairs);

  try {
    load_corpus(dir / "absent.json", dir / "images", cfg);
    FAIL("expected an error");
  } catch (const IngestError& e) {
    CHECK(e.kind() == IngestError::Kind::unreadable);
  }
}

TEST_CASE("sha256 and base64 known answers") {
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::vector<std::uint8_t> bytes{'f', 'o', 'o', 'b', 'a'};
  CHECK(base64_encode(bytes) == "Zm9vYmE=");
  CHECK(base64_decode("Zm9vYmE=") == bytes);
  CHECK(base64_decode("") == std::vector<std::uint8_t>{});
  CHECK_THROWS_AS(base64_decode("Zm9v*mE="), ProtocolError);
}

TEST_CASE("seeded helpers are portable and uniform") {
  // mt19937_64 is fully specified; this is its 10000th output for the default seed.
  Rng rng(5489u);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = rng();
  CHECK(last == 9981545732273789042ull);

  Rng r2(7);
  std::array<int, 5> counts{};
  for (int i = 0; i < 50000; ++i) ++counts[uniform_index(r2, 5)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);

  std::vector<int> a(20), b(20);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  seeded_shuffle(std::span<int>(a), 11);
  seeded_shuffle(std::span<int>(b), 11);
  CHECK(a == b);
  std::sort(b.begin(), b.end());
  CHECK(b[19] == 19);

  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
  CHECK(derive_seed(1, "x", "a") != derive_seed(2, "x", "a"));
}

TEST_CASE("record serialization round trips") {
  CVCInstance inst{"i1", "p1", {"bush", {44, 48}, 0.42}, "src.png", "occ/i1.png", "What is the occluded object?",
                   OcclusionMeta{{1, 2, 31, 62}, 10, 3, {{1, 2}, {14, 2}}, {124, 116, 104}, 0.5, 0.9}};
  const json j = inst;
  CHECK(j.at("entity").at("span") == json::array({44, 48}));
  CHECK(j.get<CVCInstance>() == inst);

  TrialSet set{"i1", {{0, "r", {"bush"}, true, ""}}, {0, 1}, std::nullopt};
  const json js = set;
  CHECK(js.at("chosen_trial_index").is_null());
  CHECK(js.get<TrialSet>() == set);

  test::TempDir dir("jsonl");
  write_jsonl(dir / "r.jsonl", {j, js});
  const auto back = read_jsonl(dir / "r.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == j);
  CHECK(canonical_dump(json{{"b", 1}, {"a", 2}}) == R"({"a":2,"b":1})");
}

TEST_CASE("png encode and decode keep pixels and metadata") {
  Image img(3, 2, {1, 2, 3});
  img.set(2, 1, {200, 100, 50});
  img.metadata()["k"] = "v";
  const auto back = decode_image(encode_png(img));
  CHECK(back == img);

  Bitmap mask(5, 4);
  mask.set(1, 1);
  mask.set(3, 2);
  const auto mb = decode_mask_png(encode_png(mask));
  CHECK(mb == mask);
  CHECK(mb.count() == 2);
  CHECK(mb.bounds() == Box{1, 1, 4, 3});
  CHECK_THROWS(decode_image(std::vector<std::uint8_t>{1, 2, 3}));
}
