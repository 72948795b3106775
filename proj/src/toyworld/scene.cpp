#include "cvc/toyworld/scene.hpp"

#include <algorithm>
#include <cmath>

#include "cvc/core/errors.hpp"
#include "cvc/core/serialize.hpp"

namespace cvc::toyworld {

const std::array<VocabularyTerm, 12>& vocabulary() {
  static const std::array<VocabularyTerm, 12> terms = {{
      {"ball", Shape::disk},
      {"box", Shape::rect},
      {"kite", Shape::diamond},
      {"plate", Shape::disk},
      {"clock", Shape::disk},
      {"lamp", Shape::triangle},
      {"book", Shape::rect},
      {"cup", Shape::rect},
      {"vase", Shape::triangle},
      {"sign", Shape::diamond},
      {"tire", Shape::disk},
      {"drum", Shape::rect},
  }};
  return terms;
}

const std::array<NamedColor, 8>& palette() {
  static const std::array<NamedColor, 8> colors = {{
      {"red", {200, 30, 30}},
      {"blue", {30, 60, 200}},
      {"green", {30, 160, 60}},
      {"yellow", {230, 200, 20}},
      {"purple", {130, 40, 160}},
      {"orange", {240, 130, 20}},
      {"black", {20, 20, 20}},
      {"white", {255, 255, 255}},
  }};
  return colors;
}

namespace {

std::string_view shape_name(Shape s) {
  switch (s) {
    case Shape::disk: return "disk";
    case Shape::rect: return "rect";
    case Shape::triangle: return "triangle";
    case Shape::diamond: return "diamond";
  }
  return "rect";
}

Shape shape_from_name(std::string_view name) {
  for (auto s : {Shape::disk, Shape::rect, Shape::triangle, Shape::diamond}) {
    if (shape_name(s) == name) return s;
  }
  throw Error("unknown shape: " + std::string(name));
}

// Pixel-center inclusion test for a shape inscribed in its box.
bool inside(Shape shape, const Box& b, int x, int y) {
  const double cx = x + 0.5;
  const double cy = y + 0.5;
  const double w = b.width();
  const double h = b.height();
  const double u = (cx - b.x0) / w;  // [0,1] across the box
  const double v = (cy - b.y0) / h;
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return false;
  switch (shape) {
    case Shape::rect: return true;
    case Shape::disk: {
      const double du = u - 0.5;
      const double dv = v - 0.5;
      return du * du + dv * dv <= 0.25;
    }
    case Shape::triangle: return std::fabs(u - 0.5) <= v / 2.0;  // apex at the top
    case Shape::diamond: return std::fabs(u - 0.5) + std::fabs(v - 0.5) <= 0.5;
  }
  return false;
}

}  // namespace

nlohmann::json to_json(const Scene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"name", o.name},
                       {"shape", std::string(shape_name(o.shape))},
                       {"color_name", o.color_name},
                       {"color", {o.color[0], o.color[1], o.color[2]}},
                       {"box", o.box},
                       {"success_p", o.success_p},
                       {"ground_score", o.ground_score}});
  }
  return {{"width", scene.width},
          {"height", scene.height},
          {"background", {scene.background[0], scene.background[1], scene.background[2]}},
          {"objects", objects}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  scene.width = j.at("width").get<int>();
  scene.height = j.at("height").get<int>();
  for (std::size_t i = 0; i < 3; ++i) scene.background[i] = j.at("background").at(i).get<std::uint8_t>();
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.name = o.at("name").get<std::string>();
    obj.shape = shape_from_name(o.at("shape").get<std::string>());
    obj.color_name = o.value("color_name", "");
    for (std::size_t i = 0; i < 3; ++i) obj.color[i] = o.at("color").at(i).get<std::uint8_t>();
    obj.box = o.at("box").get<Box>();
    obj.success_p = o.value("success_p", 0.0);
    obj.ground_score = o.value("ground_score", 0.9);
    scene.objects.push_back(std::move(obj));
  }
  return scene;
}

Bitmap object_mask(const Scene& scene, std::size_t index) {
  const auto& obj = scene.objects.at(index);
  Bitmap mask(scene.width, scene.height);
  for (int y = std::max(0, obj.box.y0); y < std::min(scene.height, obj.box.y1); ++y) {
    for (int x = std::max(0, obj.box.x0); x < std::min(scene.width, obj.box.x1); ++x) {
      if (inside(obj.shape, obj.box, x, y)) mask.set(x, y);
    }
  }
  return mask;
}

Image render_scene(const Scene& scene) {
  Image image(scene.width, scene.height, scene.background);
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto mask = object_mask(scene, i);
    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        if (mask.get(x, y)) image.set(x, y, scene.objects[i].color);
      }
    }
  }
  return image;
}

Image render_with_metadata(const Scene& scene) {
  auto image = render_scene(scene);
  image.metadata()[std::string(kSceneMetadataKey)] = canonical_dump(to_json(scene));
  return image;
}

std::optional<Scene> scene_from_image(const Image& image) {
  const auto it = image.metadata().find(std::string(kSceneMetadataKey));
  if (it == image.metadata().end()) return std::nullopt;
  return scene_from_json(nlohmann::json::parse(it->second));
}

}  // namespace cvc::toyworld
