#include "aqtc/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>

#include "aqtc/errors.hpp"

namespace aqtc {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r') throw MissingFile(path.string());
    throw IoError("cannot open " + path.string() + " for writing");
  }
  return f;
}

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

Raster::Raster(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
}

void Raster::fill_box(const Box& box, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int x1 = std::max(box.x1, 0), x2 = std::min(box.x2, width);
  const int y1 = std::max(box.y1, 0), y2 = std::min(box.y2, height);
  for (int y = y1; y < y2; ++y)
    for (int x = x1; x < x2; ++x) {
      auto* p = at(x, y);
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
}

Raster read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Raster out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": " + what);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.at(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  FilePtr f = open_file(path, "wb");
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what, png_error_fn, png_warning_fn);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(raster.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(path.string() + ": " + what);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, raster.width, raster.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y) rows[y] = const_cast<png_bytep>(raster.at(0, y));
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::pair<int, int> png_size(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char header[24];
  if (std::fread(header, 1, sizeof header, f.get()) != sizeof header || png_sig_cmp(header, 0, 8) != 0)
    throw IoError(path.string() + ": not a PNG file");
  auto be32 = [&](int off) {
    return (static_cast<std::uint32_t>(header[off]) << 24) | (static_cast<std::uint32_t>(header[off + 1]) << 16) |
           (static_cast<std::uint32_t>(header[off + 2]) << 8) | header[off + 3];
  };
  return {static_cast<int>(be32(16)), static_cast<int>(be32(20))};
}

}  // namespace aqtc
