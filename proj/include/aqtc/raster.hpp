#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aqtc/core.hpp"

namespace aqtc {

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Raster() = default;
  Raster(int w, int h, std::uint8_t r = 0, std::uint8_t g = 0, std::uint8_t b = 0);

  std::uint8_t* at(int x, int y) { return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const {
    return rgb.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }

  void fill_box(const Box& box, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  bool operator==(const Raster&) const = default;
};

Raster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Raster& raster);

// Reads only the header. Returns {width, height}.
std::pair<int, int> png_size(const std::filesystem::path& path);

}  // namespace aqtc
