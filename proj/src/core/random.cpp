#include "cvc/core/random.hpp"

#include <limits>
#include <string>

#include "cvc/core/digest.hpp"

namespace cvc {

std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::string_view key) {
  std::string material = std::to_string(base);
  material.push_back('\x1f');
  material.append(purpose);
  material.push_back('\x1f');
  material.append(key);
  return hash64(material);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform_index(rng, span));
}

double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace cvc
