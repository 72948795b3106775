#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvc/toyworld/scene.hpp"

namespace cvc::toyworld {

/// Ground truth for one generated image: the object whose caption mention is
/// scripted to clear the causality threshold, and its per-trial success rate.
struct OracleEntry {
  std::string pair_id;
  std::string instance_id;
  std::string target;
  double success_p = 0.0;
};

struct ToyWorld {
  std::filesystem::path root;
  std::vector<Scene> scenes;
  std::vector<OracleEntry> oracle;
  std::filesystem::path config_path;
};

/// Random scene with 2 to 4 non-overlapping objects of distinct names.
Scene random_scene(std::uint64_t seed, int width = 160, int height = 120);

std::string caption_for(const Scene& scene);

/// Writes a complete mock-backed corpus under `out_dir`:
///   images/{id}.png   rendered scenes, description in PNG metadata
///   scenes/{id}.json  the same description as a sidecar
///   captions.json     COCO-style captions, one per image
///   mock_script.json  MLM log-probabilities that put exactly one entity per
///                     caption above gamma
///   oracle.json       the expected instance per image
///   config.json       a mock-backed pipeline config for the corpus
ToyWorld generate_toy_world(int n_images, std::uint64_t seed, const std::filesystem::path& out_dir,
                            double gamma = 0.3);

}  // namespace cvc::toyworld
