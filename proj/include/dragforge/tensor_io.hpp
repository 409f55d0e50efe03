// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dragforge/grid.hpp"

namespace dragforge {

/// Largest grid accepted from any external source.
inline constexpr int kMaxGridSide = 2048;
inline constexpr int kMaxGridChannels = 256;

enum class TensorFormat { dft1, npy };

/// "DFT1" magic, u32 LE height/width/channels, then f32 LE values in (y, x, c) order.
std::string encode_dft(const GridTensor& grid);

/// NPY v1.0, dtype '<f4', C order, shape (height, width, channels).
std::string encode_npy(const GridTensor& grid);

/// Decodes either format, detected from the magic bytes. Rejects non-finite values.
GridTensor decode_grid(std::string_view bytes, const std::string& source = "<memory>");

GridTensor read_grid(const std::filesystem::path& path);
void write_grid(const std::filesystem::path& path, const GridTensor& grid,
                TensorFormat format = TensorFormat::dft1);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dragforge
