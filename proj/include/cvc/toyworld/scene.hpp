#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/core/types.hpp"
#include "cvc/image/image.hpp"

namespace cvc::toyworld {

/// PNG text key carrying the scene description of a toy-world image.
inline constexpr std::string_view kSceneMetadataKey = "cvc.scene";

enum class Shape { disk, rect, triangle, diamond };

struct VocabularyTerm {
  std::string_view name;
  Shape shape;
};

/// The fixed 12-term object vocabulary.
const std::array<VocabularyTerm, 12>& vocabulary();

struct NamedColor {
  std::string_view name;
  Rgb rgb;
};
const std::array<NamedColor, 8>& palette();

struct SceneObject {
  std::string name;
  Shape shape = Shape::rect;
  std::string color_name;
  Rgb color{};
  Box box;
  /// Probability that the mock vision-language model names this object when it is occluded.
  double success_p = 0.0;
  double ground_score = 0.9;

  bool operator==(const SceneObject&) const = default;
};

struct Scene {
  int width = 0;
  int height = 0;
  Rgb background{235, 235, 225};
  std::vector<SceneObject> objects;

  bool operator==(const Scene&) const = default;
};

nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

Bitmap object_mask(const Scene& scene, std::size_t index);
/// Pixels only; no metadata.
Image render_scene(const Scene& scene);
/// Rendered image with the scene description attached as PNG metadata.
Image render_with_metadata(const Scene& scene);
std::optional<Scene> scene_from_image(const Image& image);

}  // namespace cvc::toyworld
