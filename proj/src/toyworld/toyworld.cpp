#include "cvc/toyworld/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cvc/causality/causality.hpp"
#include "cvc/core/corpus.hpp"
#include "cvc/core/random.hpp"
#include "cvc/core/serialize.hpp"
#include "cvc/extract/extract.hpp"
#include "cvc/pipeline/pipeline.hpp"
#include "cvc/services/mocks.hpp"

namespace cvc::toyworld {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kColumns = 4;
constexpr int kRows = 2;

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_unit(rng); }

}  // namespace

Scene random_scene(std::uint64_t seed, int width, int height) {
  Rng rng(seed);
  Scene scene;
  scene.width = width;
  scene.height = height;

  // Objects sit in distinct cells of a 4x2 grid, so they never overlap.
  std::array<int, kColumns * kRows> cells{};
  std::iota(cells.begin(), cells.end(), 0);
  seeded_shuffle(std::span<int>(cells), derive_seed(seed, "cells"));
  std::array<std::size_t, 12> names{};
  std::iota(names.begin(), names.end(), std::size_t{0});
  seeded_shuffle(std::span<std::size_t>(names), derive_seed(seed, "names"));

  const int count = static_cast<int>(uniform_int(rng, 2, 4));
  const int cell_w = width / kColumns;
  const int cell_h = height / kRows;
  for (int i = 0; i < count; ++i) {
    const auto& term = vocabulary()[names[static_cast<std::size_t>(i)]];
    const auto& color = palette()[uniform_index(rng, palette().size())];
    const int max_side = std::min(cell_w, cell_h) - 4;
    const int side = static_cast<int>(uniform_int(rng, std::max(6, max_side * 2 / 3), max_side));
    const int cx = (cells[static_cast<std::size_t>(i)] % kColumns) * cell_w;
    const int cy = (cells[static_cast<std::size_t>(i)] / kColumns) * cell_h;
    const int x0 = cx + static_cast<int>(uniform_int(rng, 0, cell_w - side));
    const int y0 = cy + static_cast<int>(uniform_int(rng, 0, cell_h - side));

    SceneObject obj;
    obj.name = std::string(term.name);
    obj.shape = term.shape;
    obj.color_name = std::string(color.name);
    obj.color = color.rgb;
    obj.box = {x0, y0, x0 + side, y0 + side};
    obj.success_p = uniform(rng, 0.02, 0.40);
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

std::string caption_for(const Scene& scene) {
  std::string out = "A scene with ";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i > 0) out += i + 1 == scene.objects.size() ? " and " : ", ";
    out += "a " + scene.objects[i].color_name + " " + scene.objects[i].name;
  }
  return out + ".";
}

ToyWorld generate_toy_world(int n_images, std::uint64_t seed, const fs::path& out_dir, double gamma) {
  ToyWorld world;
  world.root = out_dir;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "scenes");

  services::MockScript script;
  json images = json::array();
  json annotations = json::array();
  json oracle = json::array();

  for (int i = 0; i < n_images; ++i) {
    const long long image_id = i + 1;
    const long long ann_id = 1000 + i;
    const auto scene_seed = derive_seed(seed, "scene", std::to_string(image_id));
    auto scene = random_scene(scene_seed);
    Rng rng(derive_seed(scene_seed, "script"));
    const auto causal = static_cast<std::size_t>(uniform_index(rng, scene.objects.size()));

    const auto file = "img" + std::to_string(image_id) + ".png";
    save_png(out_dir / "images" / file, render_with_metadata(scene));
    write_text_file(out_dir / "scenes" / ("img" + std::to_string(image_id) + ".json"), to_json(scene).dump(2) + "\n");

    const auto caption = caption_for(scene);
    images.push_back({{"id", image_id}, {"file_name", file}, {"width", scene.width}, {"height", scene.height}});
    annotations.push_back({{"id", ann_id}, {"image_id", image_id}, {"caption", caption}});

    // One pseudo-subword per mention: the causal object well above gamma,
    // the rest well below, so the filter keeps exactly one entity.
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
      const auto& name = scene.objects[k].name;
      CandidateEntity entity{name, *extract::locate_surface(caption, name), std::nullopt};
      const auto masked = causality::mask_entity(caption, entity);
      const double p = k == causal ? uniform(rng, gamma + 0.15, 0.95) : uniform(rng, 0.02, gamma - 0.08);
      script.script_mlm(masked.text, masked.target, {std::log(p)});
    }

    const auto pair_id = make_pair_id(image_id, ann_id);
    const auto& target = scene.objects[causal];
    OracleEntry entry{pair_id, pipeline::make_instance_id(pair_id, target.name), target.name, target.success_p};
    oracle.push_back({{"pair_id", entry.pair_id},
                      {"instance_id", entry.instance_id},
                      {"target", entry.target},
                      {"success_p", entry.success_p}});
    world.oracle.push_back(std::move(entry));
    world.scenes.push_back(std::move(scene));
  }

  write_text_file(out_dir / "captions.json",
                  json{{"images", images}, {"annotations", annotations}}.dump(2) + "\n");
  write_text_file(out_dir / "mock_script.json", script.to_json().dump(2) + "\n");
  write_text_file(out_dir / "oracle.json", oracle.dump(2) + "\n");

  const json config = {{"seed", seed},
                       {"gamma", gamma},
                       {"use_mocks", true},
                       {"mock_script", "mock_script.json"},
                       {"corpus", {{"captions", "captions.json"}, {"image_root", "images"}}}};
  world.config_path = out_dir / "config.json";
  write_text_file(world.config_path, config.dump(2) + "\n");
  return world;
}

}  // namespace cvc::toyworld
