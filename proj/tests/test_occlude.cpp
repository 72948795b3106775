#include <doctest.h>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/occlude/occlude.hpp"
#include "cvc/toyworld/scene.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cvc;
using namespace cvc::occlude;
using nlohmann::json;

namespace {

GroundedObject full_rect(int w, int h, Box box) {
  GroundedObject obj{box, 0.9, Bitmap(w, h)};
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) obj.mask.set(x, y);
  }
  return obj;
}

PipelineConfig no_jitter() {
  auto cfg = validate_config(json::object());
  cfg.patch_jitter = false;
  return cfg;
}

Image textured(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>(x * 7 % 120), static_cast<std::uint8_t>(y * 5 % 110),
                     static_cast<std::uint8_t>((x + y) % 100)});
    }
  }
  return img;
}

}  // namespace

TEST_CASE("side and gap arithmetic") {
  CHECK(patch_side({0, 0, 30, 60}) == 10);
  CHECK(patch_side({0, 0, 5, 5}) == 1);
  CHECK(patch_side({0, 0, 2, 90}) == 1);
  CHECK(patch_gap(10, 0.25) == 3);  // 2.5 rounds away from zero
  CHECK(patch_gap(1, 0.25) == 1);
  CHECK(patch_gap(12, 0.25) == 3);
}

TEST_CASE("30 by 60 full rectangle without jitter gives 8 patches") {
  const auto obj = full_rect(30, 60, {0, 0, 30, 60});
  const auto plan = plan_patches(obj, no_jitter(), 1);
  CHECK(plan.side == 10);
  CHECK(plan.gap == 3);
  std::vector<PatchCorner> expected;
  for (int y : {0, 13, 26, 39}) {
    for (int x : {0, 13}) expected.push_back({x, y});
  }
  CHECK(plan.patches == expected);
  CHECK(plan.coverage == doctest::Approx(800.0 / 1800.0));
}

TEST_CASE("single-pixel mask in the corner") {
  auto obj = full_rect(20, 20, {0, 0, 1, 1});
  const auto plan = plan_patches(obj, no_jitter(), 1);
  REQUIRE(plan.patches.size() == 1);
  CHECK(plan.patches[0] == PatchCorner{0, 0});
  CHECK(plan.side == 1);
  CHECK(plan.coverage == 1.0);
}

TEST_CASE("empty plans are occlusion misses") {
  GroundedObject empty{{0, 0, 4, 4}, 0.9, Bitmap(8, 8)};
  CHECK_THROWS_AS(plan_patches(empty, no_jitter(), 1), InstanceSkipped);
  // A thin diagonal never holds a patch center.
  GroundedObject diag{{0, 0, 9, 9}, 0.9, Bitmap(9, 9)};
  for (int i = 0; i < 9; ++i) diag.mask.set(i, 8 - i);
  try {
    plan_patches(diag, no_jitter(), 1);
  } catch (const InstanceSkipped& e) {
    CHECK(e.reason() == "occlusion-miss");
  }
}

TEST_CASE("random geometry obeys every rule") {
  Rng rng(77);
  const auto cfg = validate_config(json::object());
  int planned = 0;
  for (int i = 0; i < 300; ++i) {
    const int w = static_cast<int>(uniform_int(rng, 8, 120));
    const int h = static_cast<int>(uniform_int(rng, 8, 120));
    const int x0 = static_cast<int>(uniform_int(rng, 0, w - 1));
    const int y0 = static_cast<int>(uniform_int(rng, 0, h - 1));
    const int x1 = static_cast<int>(uniform_int(rng, x0 + 1, w));
    const int y1 = static_cast<int>(uniform_int(rng, y0 + 1, h));
    const auto obj = full_rect(w, h, {x0, y0, x1, y1});
    try {
      const auto plan = plan_patches(obj, cfg, static_cast<std::uint64_t>(i));
      CHECK(oracle::check_patch_geometry(plan.patches, plan.side, obj.box, obj.mask) == "");
      ++planned;
    } catch (const InstanceSkipped&) {
    }
  }
  CHECK(planned > 250);
}

TEST_CASE("jitter is seeded") {
  const auto obj = full_rect(100, 100, {10, 10, 90, 90});
  const auto cfg = validate_config(json::object());
  CHECK(plan_patches(obj, cfg, 5).patches == plan_patches(obj, cfg, 5).patches);
  CHECK(plan_patches(obj, cfg, 5).patches != plan_patches(obj, cfg, 6).patches);
}

TEST_CASE("pixel contract") {
  const auto img = textured(20, 20);
  const Rgb fill{124, 116, 104};

  PatchPlan none{2, 1, {}, fill, 0.0};
  CHECK(encode_png(apply_occlusion(img, none)) == encode_png(img));

  PatchPlan one{2, 1, {{0, 0}}, fill, 0.0};
  const auto [c1, f1] = oracle::pixel_diff(img, apply_occlusion(img, one), fill);
  CHECK(c1 == 4);
  CHECK(f1);

  PatchPlan two{3, 1, {{1, 1}, {10, 12}}, fill, 0.0};
  const auto [c2, f2] = oracle::pixel_diff(img, apply_occlusion(img, two), fill);
  CHECK(c2 == 2 * 9);
  CHECK(f2);

  PatchPlan outside{3, 1, {{19, 19}}, fill, 0.0};
  CHECK_THROWS_AS(apply_occlusion(img, outside), ContractViolation);
}

TEST_CASE("grounding picks the best box and its mask") {
  toyworld::Scene scene;
  scene.width = 64;
  scene.height = 48;
  scene.objects.push_back({"ball", toyworld::Shape::disk, "red", {220, 40, 40}, {10, 10, 40, 40}, 0.5, 0.9});
  const auto png = encode_png(toyworld::render_with_metadata(scene));
  const auto cfg = validate_config(json::object());

  test::MockRig rig;
  const auto obj = ground_entity(*rig.client, png, 64, 48, "ball", cfg);
  CHECK(obj.box == Box{10, 10, 40, 40});
  CHECK(obj.mask == toyworld::object_mask(scene, 0));

  try {
    ground_entity(*rig.client, png, 64, 48, "kite", cfg);
    FAIL("expected a skip");
  } catch (const InstanceSkipped& e) {
    CHECK(e.reason() == "grounding-miss");
  }

  rig.transport->set_interceptor([](ServiceKind kind, const json&) -> std::optional<services::HttpReply> {
    if (kind != ServiceKind::ground) return std::nullopt;
    return services::HttpReply{
        200, R"({"boxes":[{"x0":10,"y0":10,"x1":40,"y1":40,"score":0.9},{"x0":0,"y0":0,"x1":8,"y1":8,"score":0.4}]})"};
  });
  CHECK(ground_entity(*rig.client, png, 64, 48, "thing", cfg).box == Box{10, 10, 40, 40});
}

TEST_CASE("low grounding score and empty masks skip the instance") {
  toyworld::Scene scene;
  scene.width = 32;
  scene.height = 32;
  scene.objects.push_back({"ball", toyworld::Shape::disk, "red", {220, 40, 40}, {4, 4, 20, 20}, 0.5, 0.1});
  const auto png = encode_png(toyworld::render_with_metadata(scene));
  const auto cfg = validate_config(json::object());
  test::MockRig rig;
  try {
    ground_entity(*rig.client, png, 32, 32, "ball", cfg);
    FAIL("expected a skip");
  } catch (const InstanceSkipped& e) {
    CHECK(e.reason() == "low-ground-score");
  }

  // A fresh client, so the cached low-score answer is not reused.
  test::MockRig off_mask;
  off_mask.transport->set_interceptor([](ServiceKind kind, const json&) -> std::optional<services::HttpReply> {
    if (kind != ServiceKind::ground) return std::nullopt;
    return services::HttpReply{200, R"({"boxes":[{"x0":24,"y0":24,"x1":30,"y1":30,"score":0.9}]})"};
  });
  try {
    ground_entity(*off_mask.client, png, 32, 32, "ball", cfg);
    FAIL("expected a skip");
  } catch (const InstanceSkipped& e) {
    CHECK(e.reason() == "segmentation-miss");
  }
}
