#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"
#include "cvc/image/image.hpp"
#include "cvc/services/client.hpp"

namespace cvc::occlude {

struct GroundedObject {
  Box box;
  double ground_score = 0.0;
  Bitmap mask;  // image-sized; may extend past the box
};

struct PatchPlan {
  int side = 1;
  int gap = 1;
  std::vector<PatchCorner> patches;
  Rgb fill_rgb{};
  double coverage = 0.0;
};

/// Best-scoring grounding box, then its segmentation mask. Throws
/// InstanceSkipped with reason grounding-miss, low-ground-score or
/// segmentation-miss.
GroundedObject ground_entity(services::ServiceClient& client, std::span<const std::uint8_t> png, int width,
                             int height, const std::string& surface, const PipelineConfig& cfg);

/// max(1, floor(min(w, h) / 3))
int patch_side(const Box& box);
/// max(1, round(side * ratio))
int patch_gap(int side, double ratio);

/// Square patches on a grid of stride side+gap over the mask's bounding
/// rectangle, each cell jittered by [0, gap] per axis when cfg.patch_jitter is
/// set. A patch is kept iff it lies inside the image and its center pixel is
/// set in the mask. Throws InstanceSkipped("occlusion-miss") if none is kept.
PatchPlan plan_patches(const GroundedObject& obj, const PipelineConfig& cfg, std::uint64_t seed);

/// Paints every patch with the plan's fill; all other pixels are untouched.
Image apply_occlusion(const Image& image, const PatchPlan& plan);

}  // namespace cvc::occlude
