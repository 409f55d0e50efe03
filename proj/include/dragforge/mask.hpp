// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dragforge/grid.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

struct DragPair {
  Point handle;
  Point target;

  bool degenerate() const { return handle == target; }
  double length() const { return distance(handle, target); }
};

/// Handle/target pairs plus the optimization budget of one drag.
struct DragInstruction {
  std::vector<DragPair> pairs;
  int n_steps = 16;
  int n_max = 300;
  double learning_rate = 0.01;
  double stop_radius = 1.0;

  /// Throws ParameterError on an empty pair list or inconsistent budgets.
  void validate() const;
  /// Throws BoundsError naming the first point outside an H x W grid.
  void check_bounds(int height, int width) const;
};

/// Binary editable-region map. source_labels is empty for externally drawn masks.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1
  std::vector<int> source_labels;  // ascending

  Mask() = default;
  Mask(int h, int w, bool fill = false);

  bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Pixels whose nearest-pixel cell the segment a->b passes through, in visiting order.
/// Besides 0.5 px arc-length samples, one sample is taken inside every stretch between
/// consecutive cell-boundary crossings, so no visited cell is missed.
std::vector<Pixel> segment_pixels(const Point& a, const Point& b);

/// Labels of the handle patch and of every patch the handle->target segment crosses,
/// unioned over pairs.
std::vector<int> mask_labels(const Segmentation& seg, const DragInstruction& instr);

/// Union of the mask_labels patches, optionally dilated by a square of radius `dilation`.
Mask generate_mask(const Segmentation& seg, const DragInstruction& instr, int dilation = 0);

/// Chebyshev dilation; source labels are kept.
Mask dilate(const Mask& mask, int radius);

/// H x W x 1 grid holding 0 inside the mask and 1 outside.
GridTensor mask_complement_weighting(const Mask& mask);

Mask mask_from_labels(const Segmentation& seg, const std::vector<int>& labels);

}  // namespace dragforge
