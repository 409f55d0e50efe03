// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "dragforge/grid.hpp"

namespace dragforge {

struct PatchCenter {
  Point centroid;
  std::vector<float> feature;  // mean feature vector
  int size = 0;                // pixel count
};

/// Superpixel partition of an H x W grid.
struct Segmentation {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // row-major, each in [0, n_patches)
  int n_patches = 0;
  std::vector<PatchCenter> centers;
  double compactness = 0.0;

  int label(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct SlicOptions {
  int n_patches = 256;
  double compactness = 10.0;
  int max_iters = 10;
  bool enforce_connectivity = true;
};

/// Per-iteration record of the clustering objective, sum over pixels of the squared
/// joint distance to the assigned center, evaluated right after each assignment pass.
struct SlicTrace {
  std::vector<double> objective;
  std::vector<int> changed;  // labels changed by each assignment pass
};

/// Grid layout (columns, rows) of the initial cluster centers.
std::pair<int, int> slic_grid_layout(int n_patches, int height, int width);

/// Initial centers at the cell centers of the slic_grid_layout partition.
std::vector<Point> slic_initial_centers(int n_patches, int height, int width);

/// SLIC over an arbitrary feature space. Pixels are clustered by
/// D^2 = |f - f_k|^2 + (compactness / S)^2 |xy - xy_k|^2 with S = sqrt(H W / n_patches),
/// each center claiming pixels within S of it along both axes.
Segmentation slic_segment(const GridTensor& features, const SlicOptions& options,
                          SlicTrace* trace = nullptr);

/// Makes every label 4-connected. Detached pieces smaller than a quarter of the mean
/// patch area merge into their largest neighbouring region; larger ones get a label.
Segmentation enforce_connectivity(const Segmentation& seg);

/// Throws BoundsError if p is outside the grid.
int label_at(const Segmentation& seg, const Point& p);

/// All pixels sharing the label of the pixel nearest to p, in scan order.
std::vector<Pixel> region_of(const Segmentation& seg, const Point& p);

/// Pixels of one label, in scan order.
std::vector<Pixel> pixels_with_label(const Segmentation& seg, int label);

/// Recomputes centroids, sizes and (when features are given) mean features.
void recompute_centers(Segmentation& seg, const GridTensor* features);

/// Throws DataError unless labels partition the grid into [0, n_patches).
void validate_segmentation(const Segmentation& seg);

/// Label map as an H x W x 1 grid.
GridTensor labels_to_grid(const Segmentation& seg);

/// Inverse of labels_to_grid (centers get centroids only).
Segmentation segmentation_from_grid(const GridTensor& grid);

}  // namespace dragforge
