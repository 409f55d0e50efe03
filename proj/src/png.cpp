// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/png.hpp"

#include <png.h>

#include <cstring>
#include <random>

namespace dragforge {

namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void flush_nothing(png_structp) {}

[[noreturn]] void on_error(png_structp, png_const_charp msg) { throw DataError(msg); }
void on_warning(png_structp, png_const_charp) {}

std::string write_png(int height, int width, int bit_depth, int color_type,
                      const std::vector<std::vector<std::uint8_t>>& rows) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("cannot allocate PNG info");
  }
  std::string out;
  try {
    png_set_error_fn(png, nullptr, on_error, on_warning);
    png_set_write_fn(png, &out, append_bytes, flush_nothing);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows) png_write_row(png, row.data());
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::string encode_mask_png(const Mask& mask) {
  std::vector<std::vector<std::uint8_t>> rows(mask.height,
                                              std::vector<std::uint8_t>((mask.width + 7) / 8, 0));
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) rows[y][x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
    }
  }
  return write_png(mask.height, mask.width, 1, PNG_COLOR_TYPE_GRAY, rows);
}

Mask decode_mask_png(std::string_view bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError(std::string("invalid mask PNG: ") + image.message);
  }
  if (image.width < 1 || image.height < 1 || image.width > 2048 || image.height > 2048) {
    png_image_free(&image);
    throw DataError("mask PNG dimensions outside [1, 2048]");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> gray(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, gray.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("invalid mask PNG: " + msg);
  }
  Mask m(static_cast<int>(image.height), static_cast<int>(image.width));
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = gray[i] != 0 ? 1 : 0;
  return m;
}

std::string encode_rgb_png(int height, int width, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) {
    throw ShapeError("RGB buffer does not match image size");
  }
  std::vector<std::vector<std::uint8_t>> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y].assign(rgb.begin() + static_cast<std::ptrdiff_t>(y) * width * 3,
                   rgb.begin() + static_cast<std::ptrdiff_t>(y + 1) * width * 3);
  }
  return write_png(height, width, 8, PNG_COLOR_TYPE_RGB, rows);
}

std::uint32_t label_color(int label) {
  std::mt19937 rng(0x5eedu + static_cast<std::uint32_t>(label) * 2654435761u);
  rng.discard(4);
  return static_cast<std::uint32_t>(rng()) & 0xffffffu;
}

std::string encode_labels_png(const Segmentation& seg) {
  std::vector<std::uint32_t> palette(seg.n_patches);
  for (int l = 0; l < seg.n_patches; ++l) palette[l] = label_color(l);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(seg.height) * seg.width * 3);
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    const std::uint32_t c = palette[seg.labels[i]];
    rgb[3 * i] = static_cast<std::uint8_t>(c >> 16);
    rgb[3 * i + 1] = static_cast<std::uint8_t>(c >> 8);
    rgb[3 * i + 2] = static_cast<std::uint8_t>(c);
  }
  return encode_rgb_png(seg.height, seg.width, rgb);
}

}  // namespace dragforge
