#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "resynth/error.hpp"
#include "resynth/features.hpp"

namespace resynth {

// Interleaved 8-bit RGB, row-major, no padding.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h);

  std::uint8_t& at(int x, int y, int c) noexcept {
    return rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  std::uint8_t at(int x, int y, int c) const noexcept {
    return rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c)];
  }
  bool valid() const noexcept {
    return width > 0 && height > 0 &&
           rgb.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

double mean_absolute_error(const Image& a, const Image& b);

// Deterministic portrait-like fixture: smooth shading, a few soft shapes and
// fine texture, so lossy codecs have something to lose.
Image make_fixture_image(int width, int height, std::uint64_t seed);

// Codecs (libjpeg-style 1-100 quality scale).
Bytes encode_png(const Image& image);
Bytes encode_jpeg(const Image& image, int quality);
Bytes encode_webp(const Image& image, int quality);
Image decode_image(std::span<const std::byte> bytes);

Image read_image(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace resynth
