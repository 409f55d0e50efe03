// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dragforge/mask.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

/// 1-bit grayscale PNG, white inside the mask.
std::string encode_mask_png(const Mask& mask);

/// Reads any PNG; pixels with nonzero gray level are inside. Throws DataError.
Mask decode_mask_png(std::string_view bytes);

/// 8-bit RGB PNG from row-major interleaved rgb (3 * height * width bytes).
std::string encode_rgb_png(int height, int width, const std::vector<std::uint8_t>& rgb);

/// Colour of a label in the fixed-seed visualisation palette.
std::uint32_t label_color(int label);

/// Label map rendered with label_color.
std::string encode_labels_png(const Segmentation& seg);

}  // namespace dragforge
