#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cvc/core/types.hpp"

namespace cvc {

/// 8-bit RGB raster plus PNG text metadata (tEXt chunks).
class Image {
public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0, 0, 0});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }

  std::map<std::string, std::string>& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }

  bool operator==(const Image&) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
  std::map<std::string, std::string> metadata_;
};

/// Image-sized 1-bit mask.
class Bitmap {
public:
  Bitmap() = default;
  Bitmap(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool get(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_ && bits_[index(x, y)] != 0;
  }
  void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
  std::size_t count() const;
  /// Tight bounding box of set pixels; all zeros when the mask is empty.
  Box bounds() const;

  bool operator==(const Bitmap&) const = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_png(const Bitmap& mask);
/// Decodes PNG (any color type, expanded to RGB8) or JPEG. Throws cvc::Error.
Image decode_image(std::span<const std::uint8_t> bytes);
/// Nonzero pixels of any PNG become set bits.
Bitmap decode_mask_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image& image);

}  // namespace cvc
