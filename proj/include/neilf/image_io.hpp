#pragma once

// Float images (PFM) and 8-bit images (PNG). Pixel data is row-major, top row first, channels
// interleaved; PFM's bottom-to-top row order is handled on disk only.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace neilf {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  float& at(int row, int col, int ch) { return data[(static_cast<std::size_t>(row) * width + col) * channels + ch]; }
  float at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int row, int col, int ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

// Writes little-endian PFM ("PF" for 3 channels, "Pf" for 1). Float bits are copied verbatim.
void write_pfm(const std::filesystem::path& path, const Image& image);
// Accepts either endianness; throws Error(kIo / kFormat) with the path on failure.
Image read_pfm(const std::filesystem::path& path);

// 8-bit grayscale (1 channel) or RGB (3 channels).
void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path, int channels);

}  // namespace neilf
