#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvc {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const std::uint8_t> data);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws cvc::ProtocolError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// 64-bit prefix of the SHA-256 digest; used to derive seeds and fingerprints.
std::uint64_t hash64(std::string_view data);

}  // namespace cvc
