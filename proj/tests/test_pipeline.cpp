#include <doctest.h>

#include <cstdlib>

#include "cvc/core/digest.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/emit/emit.hpp"
#include "cvc/pipeline/pipeline.hpp"
#include "cvc/services/client.hpp"
#include "cvc/toyworld/toyworld.hpp"
#include "support.hpp"

using namespace cvc;
using namespace cvc::pipeline;
using nlohmann::json;

namespace {

std::string file_sha(const std::filesystem::path& p) { return sha256_hex(read_file_bytes(p)); }

Pipeline make(const PipelineConfig& cfg, const std::filesystem::path& workdir) {
  return Pipeline(cfg, workdir, make_services(cfg).client);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CVC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("toy world bytes are stable for a fixed seed") {
  test::TempDir a("toy-a"), b("toy-b");
  const auto wa = toyworld::generate_toy_world(1, 9, a.path());
  toyworld::generate_toy_world(1, 9, b.path());
  for (const char* f : {"images/img1.png", "scenes/img1.json", "captions.json", "mock_script.json", "oracle.json"}) {
    CAPTURE(f);
    CHECK(file_sha(a / f) == file_sha(b / f));
  }
  REQUIRE(wa.scenes.size() == 1);
  const auto n = wa.scenes[0].objects.size();
  CHECK(n >= 2);
  CHECK(n <= 4);
}

TEST_CASE("toy world cardinality") {
  test::TempDir dir("toy-200");
  const auto w = toyworld::generate_toy_world(200, 1, dir.path());
  CHECK(w.oracle.size() == 200);
  std::size_t pngs = 0, sidecars = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "images")) pngs += e.path().extension() == ".png";
  for (const auto& e : std::filesystem::directory_iterator(dir / "scenes")) sidecars += e.path().extension() == ".json";
  CHECK(pngs == 200);
  CHECK(sidecars == 200);
  CHECK(json::parse(read_text_file(dir / "captions.json")).at("annotations").size() == 200);
}

TEST_CASE("scene sidecar drives the mock grounder") {
  toyworld::Scene scene;
  scene.width = 80;
  scene.height = 60;
  scene.objects.push_back({"ball", toyworld::Shape::disk, "red", {220, 40, 40}, {10, 10, 40, 40}, 0.3, 0.9});
  const auto image = toyworld::render_with_metadata(scene);
  CHECK(toyworld::scene_from_image(decode_image(encode_png(image))) == scene);
  test::MockRig rig;
  const auto boxes = services::ground(*rig.client, encode_png(image), "ball");
  REQUIRE(boxes.size() == 1);
  CHECK(boxes[0].box == Box{10, 10, 40, 40});
}

TEST_CASE("stages require their prerequisites") {
  test::TempDir toy("toy-pre"), work("work-pre");
  const auto world = toyworld::generate_toy_world(3, 2, toy.path());
  const auto cfg = load_config_file(world.config_path.string());
  auto p = make(cfg, work.path());
  try {
    p.run(Stage::occlude);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()) == "missing stage output: ingest");
  }
  p.run(Stage::ingest);
  p.run(Stage::extract);
  try {
    p.run(Stage::occlude);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()) == "missing stage output: score");
  }
}

TEST_CASE("rerunning a completed stage is a no-op") {
  test::TempDir toy("toy-noop"), work("work-noop");
  const auto world = toyworld::generate_toy_world(4, 2, toy.path());
  const auto cfg = load_config_file(world.config_path.string());
  auto p = make(cfg, work.path());
  p.run(Stage::ingest);
  const auto first = p.run(Stage::extract);
  CHECK_FALSE(first.noop);
  const auto bytes = read_text_file(work / "extract/manifest.json");
  const auto second = make(cfg, work.path()).run(Stage::extract);
  CHECK(second.noop);
  CHECK(read_text_file(work / "extract/manifest.json") == bytes);
  CHECK(second.manifest.to_json() == first.manifest.to_json());
}

TEST_CASE("upstream edits invalidate downstream stages") {
  test::TempDir toy("toy-chain"), work("work-chain");
  const auto world = toyworld::generate_toy_world(4, 2, toy.path());
  const auto cfg = load_config_file(world.config_path.string());
  auto p = make(cfg, work.path());
  p.run(Stage::ingest);
  p.run(Stage::extract);
  p.run(Stage::score);

  // Tampering with an output breaks its digest, so the stage itself reruns.
  auto records = read_jsonl(work / "extract/records.jsonl");
  records.pop_back();
  write_jsonl(work / "extract/records.jsonl", records);
  CHECK_FALSE(p.run(Stage::extract).noop);
  CHECK(p.run(Stage::score).noop);  // restored bytes, same digest

  // A changed threshold reruns score but not extract.
  auto stricter = cfg;
  stricter.gamma = 0.9;
  auto q = make(stricter, work.path());
  CHECK(q.run(Stage::extract).noop);
  CHECK_FALSE(q.run(Stage::score).noop);
}

TEST_CASE("run-all on the toy corpus keeps counts consistent") {
  test::TempDir toy("toy-all"), work("work-all");
  const auto world = toyworld::generate_toy_world(12, 5, toy.path());
  auto cfg = load_config_file(world.config_path.string());
  write_text_file(toy / "general.json", json::array({{{"id", "g0"}, {"conversations", json::array({{{"from", "human"}, {"value", "hi"}}, {{"from", "gpt"}, {"value", "hello"}}})}}}).dump());
  cfg.general_dataset = (toy / "general.json").string();
  auto p = make(cfg, work.path());
  const auto runs = p.run_all();
  REQUIRE(runs.size() == kStageOrder.size());
  for (auto stage : kStageOrder) CHECK(std::filesystem::exists(p.stage_dir(stage) / "manifest.json"));

  const auto m = [&](Stage s) { return *p.manifest(s); };
  CHECK(m(Stage::ingest).records == 12);
  CHECK(m(Stage::extract).records + m(Stage::extract).failures == 12);
  CHECK(m(Stage::score).extra.at("retained") == 12);  // one causal entity per caption
  CHECK(m(Stage::occlude).records + m(Stage::occlude).failures + m(Stage::occlude).skipped == 12);
  CHECK(m(Stage::instruct).records == m(Stage::occlude).records);
  CHECK(m(Stage::trials).records == m(Stage::instruct).records);
  CHECK(m(Stage::select).records <= m(Stage::trials).records);
  CHECK(m(Stage::emit).records == 2 * m(Stage::select).records);
  CHECK(m(Stage::emit).extra.at("dataset_count") == m(Stage::emit).records + 1);
  CHECK(m(Stage::emit).inputs.at("select") == m(Stage::select).output_digest);

  const auto dataset = emit::read_dataset(work / "emit/dataset.json");
  CHECK(dataset.size() == m(Stage::emit).records + 1);
  for (const auto& r : dataset) {
    if (r.at("id") == "g0") continue;
    CHECK(std::filesystem::exists(work.path() / r.at("image").get<std::string>()));
  }
  CHECK(std::filesystem::exists(work / "report/summary.txt"));
  CHECK(std::filesystem::exists(work / "report/difficulty.csv"));
  CHECK(json::parse(read_text_file(work / "report/report.json")).contains("recall"));

  // Occluded images keep the scene metadata and differ from the source.
  const auto occ = read_jsonl(work / "occlude/records.jsonl").front();
  const auto img = load_image(work.path() / occ.at("occluded_image_ref").get<std::string>());
  CHECK(toyworld::scene_from_image(img).has_value());
  CHECK(img != load_image(occ.at("source_image_ref").get<std::string>()));
}

TEST_CASE("unreachable services fail the stage as unavailable") {
  test::TempDir toy("toy-down"), work("work-down");
  const auto world = toyworld::generate_toy_world(3, 2, toy.path());
  auto cfg = load_config_file(world.config_path.string());
  cfg.use_mocks = false;
  for (auto kind : kAllServiceKinds) cfg.endpoints[kind] = "http://127.0.0.1:9";
  cfg.retry = {1, 0, 1.0};
  auto p = make(cfg, work.path());
  p.run(Stage::ingest);
  CHECK_THROWS_AS(p.run(Stage::extract), ServiceUnavailable);
  CHECK_FALSE(std::filesystem::exists(work / "extract/manifest.json"));
}

TEST_CASE("mock service failures below the cap are recorded") {
  test::TempDir toy("toy-fail"), work("work-fail");
  const auto world = toyworld::generate_toy_world(30, 2, toy.path());
  auto cfg = load_config_file(world.config_path.string());
  cfg.failure_cap = 0.1;
  auto services = make_services(cfg);
  // Two 4xx answers from the extractor: two pairs fail, the stage survives.
  services.mock->fail_next(ServiceKind::text_generate, {400, 400});
  Pipeline p(cfg, work.path(), services.client);
  p.run(Stage::ingest);
  const auto run = p.run(Stage::extract);
  CHECK(run.manifest.failures == 2);
  CHECK(run.manifest.records == 28);
  CHECK(read_jsonl(work / "extract/failures.jsonl").size() == 2);
}

TEST_CASE("CLI exit codes") {
  test::TempDir toy("toy-cli"), work("work-cli");
  CHECK(run_cli("toy-world --n 3 --seed 4 --out " + toy.path().string()) == 0);
  const auto cfg = (toy / "config.json").string();
  CHECK(run_cli("run --config " + cfg + " --workdir " + work.path().string() + " --stage ingest") == 0);
  CHECK(run_cli("run --config " + cfg + " --workdir " + work.path().string() + " --stage occlude") == 2);
  CHECK(run_cli("run --config " + cfg + " --workdir " + work.path().string() + " --stage bogus") == 1);
  CHECK(run_cli("run --config " + (toy / "absent.json").string()) == 1);
  CHECK(run_cli("run --bogus-flag") == 1);

  write_text_file(toy / "down.json", json{{"corpus", {{"captions", "captions.json"}, {"image_root", "images"}}},
                                          {"retry", {{"attempts", 1}, {"backoff_ms", 0}}},
                                          {"services", {{"text_generate", "http://127.0.0.1:9"},
                                                        {"vl_generate", "http://127.0.0.1:9"},
                                                        {"mlm_score", "http://127.0.0.1:9"},
                                                        {"ground", "http://127.0.0.1:9"},
                                                        {"segment", "http://127.0.0.1:9"},
                                                        {"embed", "http://127.0.0.1:9"}}}}
                                              .dump());
  test::TempDir work2("work-cli-down");
  CHECK(run_cli("run --config " + (toy / "down.json").string() + " --workdir " + work2.path().string()) == 3);
  CHECK(run_cli("run --config " + cfg + " --workdir " + work.path().string() + " --mock --mode random_entity") == 0);
}
