#pragma once

// Independent reference computations for the acceptance checks. They share no
// code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvc/core/types.hpp"
#include "cvc/image/image.hpp"

namespace cvc::oracle {

/// Failure count of a flag vector, by a plain loop.
inline int count_failures(const std::vector<bool>& success) {
  int failures = 0;
  for (bool s : success) failures += s ? 0 : 1;
  return failures;
}

/// Selection rule in integer arithmetic: F = (n-k)/n > num/den and k >= 1.
inline bool selected(int k, int n, int alpha_num, int alpha_den) {
  return k >= 1 && static_cast<long long>(n - k) * alpha_den > static_cast<long long>(alpha_num) * n;
}

/// Returns an empty string when the plan satisfies every geometric rule,
/// otherwise the first violation.
inline std::string check_patch_geometry(const std::vector<PatchCorner>& patches, int side, const Box& box,
                                        const Bitmap& mask) {
  const int expect_side = std::max(1, std::min(box.width(), box.height()) / 3);
  if (side != expect_side) return "side " + std::to_string(side) + " != " + std::to_string(expect_side);
  for (const auto& p : patches) {
    if (p.x < 0 || p.y < 0 || p.x + side > mask.width() || p.y + side > mask.height()) {
      return "patch at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") leaves the image";
    }
    if (!mask.get(p.x + side / 2, p.y + side / 2)) {
      return "patch at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") has its center off the mask";
    }
  }
  // Pairwise disjointness, checked by painting.
  std::vector<int> hits(static_cast<std::size_t>(mask.width()) * static_cast<std::size_t>(mask.height()), 0);
  for (const auto& p : patches) {
    for (int y = p.y; y < p.y + side; ++y) {
      for (int x = p.x; x < p.x + side; ++x) {
        if (++hits[static_cast<std::size_t>(y) * static_cast<std::size_t>(mask.width()) + static_cast<std::size_t>(x)] > 1) {
          return "patches overlap at (" + std::to_string(x) + "," + std::to_string(y) + ")";
        }
      }
    }
  }
  return "";
}

/// Number of pixels that differ between two equally sized images, and
/// whether every differing pixel in `after` equals `fill`.
inline std::pair<std::size_t, bool> pixel_diff(const Image& before, const Image& after, Rgb fill) {
  std::size_t changed = 0;
  bool all_fill = true;
  for (int y = 0; y < before.height(); ++y) {
    for (int x = 0; x < before.width(); ++x) {
      if (before.at(x, y) != after.at(x, y)) {
        ++changed;
        all_fill = all_fill && after.at(x, y) == fill;
      }
    }
  }
  return {changed, all_fill};
}

/// Distribution of the number of successes over n independent trials with
/// probability p, by enumerating all 2^n outcomes.
inline std::vector<double> binomial_by_enumeration(int n, double p) {
  std::vector<double> mass(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::uint32_t outcome = 0; outcome < (1u << n); ++outcome) {
    int k = 0;
    double prob = 1.0;
    for (int t = 0; t < n; ++t) {
      const bool s = ((outcome >> t) & 1u) != 0;
      k += s ? 1 : 0;
      prob *= s ? p : 1.0 - p;
    }
    mass[static_cast<std::size_t>(k)] += prob;
  }
  return mass;
}

}  // namespace cvc::oracle
