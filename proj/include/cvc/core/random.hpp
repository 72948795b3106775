#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cvc {

// std::mt19937_64 has a standardized output sequence; the distributions in
// <random> do not, so the helpers below are written out to keep seeded
// results identical across standard libraries.
using Rng = std::mt19937_64;

/// Seed for a named sub-stream of `base`, e.g. derive_seed(seed, "select", id).
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::string_view key = {});

/// Uniform integer in [0, n). n must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Uniform integer in [lo, hi] inclusive.
std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi);

/// Uniform real in [0, 1) with 53 bits of precision.
double uniform_unit(Rng& rng);

template <typename T>
void seeded_shuffle(std::span<T> items, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace cvc
