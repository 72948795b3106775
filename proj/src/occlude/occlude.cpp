#include "cvc/occlude/occlude.hpp"

#include <algorithm>
#include <cmath>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"

namespace cvc::occlude {

GroundedObject ground_entity(services::ServiceClient& client, std::span<const std::uint8_t> png, int width,
                             int height, const std::string& surface, const PipelineConfig& cfg) {
  const auto boxes = services::ground(client, png, surface);
  if (boxes.empty()) throw InstanceSkipped("grounding-miss", "no box grounded for '" + surface + "'");
  // Responses are sorted by descending score; take the first maximum.
  const auto best = *std::max_element(boxes.begin(), boxes.end(),
                                      [](const auto& a, const auto& b) { return a.score < b.score; });
  if (best.score < cfg.ground_score_floor) {
    throw InstanceSkipped("low-ground-score", "best box for '" + surface + "' scores " + std::to_string(best.score) +
                                                  " < floor " + std::to_string(cfg.ground_score_floor));
  }
  Box box{std::max(0, best.box.x0), std::max(0, best.box.y0), std::min(width, best.box.x1),
          std::min(height, best.box.y1)};
  if (box.width() <= 0 || box.height() <= 0) {
    throw InstanceSkipped("grounding-miss", "grounded box for '" + surface + "' lies outside the image");
  }
  auto mask = services::segment(client, png, box);
  if (mask.width() != width || mask.height() != height) {
    throw ProtocolError("/v1/segment response: mask is " + std::to_string(mask.width()) + "x" +
                        std::to_string(mask.height()) + ", image is " + std::to_string(width) + "x" +
                        std::to_string(height));
  }
  if (mask.count() == 0) throw InstanceSkipped("segmentation-miss", "empty mask for '" + surface + "'");
  return {box, best.score, std::move(mask)};
}

int patch_side(const Box& box) { return std::max(1, std::min(box.width(), box.height()) / 3); }

int patch_gap(int side, double ratio) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(side) * ratio)));
}

PatchPlan plan_patches(const GroundedObject& obj, const PipelineConfig& cfg, std::uint64_t seed) {
  const auto& mask = obj.mask;
  const auto bounds = mask.bounds();
  if (bounds.width() <= 0) throw InstanceSkipped("occlusion-miss", "empty mask");

  PatchPlan plan;
  plan.side = patch_side(obj.box);
  plan.gap = patch_gap(plan.side, cfg.patch_gap_ratio);
  plan.fill_rgb = cfg.fill_rgb;
  const int stride = plan.side + plan.gap;
  const int half = plan.side / 2;

  Rng rng(seed);
  for (int gy = bounds.y0; gy < bounds.y1; gy += stride) {
    for (int gx = bounds.x0; gx < bounds.x1; gx += stride) {
      int x = gx;
      int y = gy;
      if (cfg.patch_jitter) {
        x += static_cast<int>(uniform_int(rng, 0, plan.gap));
        y += static_cast<int>(uniform_int(rng, 0, plan.gap));
      }
      const bool in_image = x >= 0 && y >= 0 && x + plan.side <= mask.width() && y + plan.side <= mask.height();
      if (in_image && mask.get(x + half, y + half)) plan.patches.push_back({x, y});
    }
  }
  if (plan.patches.empty()) throw InstanceSkipped("occlusion-miss", "no patch center falls on the mask");

  std::size_t covered = 0;
  for (const auto& p : plan.patches) {
    for (int y = p.y; y < p.y + plan.side; ++y) {
      for (int x = p.x; x < p.x + plan.side; ++x) covered += mask.get(x, y) ? 1 : 0;
    }
  }
  plan.coverage = static_cast<double>(covered) / static_cast<double>(mask.count());
  return plan;
}

Image apply_occlusion(const Image& image, const PatchPlan& plan) {
  Image out = image;
  for (const auto& p : plan.patches) {
    for (int y = p.y; y < p.y + plan.side; ++y) {
      for (int x = p.x; x < p.x + plan.side; ++x) {
        if (!out.contains(x, y)) throw ContractViolation("patch extends outside the image");
        out.set(x, y, plan.fill_rgb);
      }
    }
  }
  return out;
}

}  // namespace cvc::occlude
