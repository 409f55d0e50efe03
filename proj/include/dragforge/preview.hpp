// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dragforge/grid.hpp"

namespace dragforge {

/// Projects every pixel's feature vector, centred on the mean, onto the leading three
/// principal components. Components are ordered by decreasing variance and signed so
/// that each one's largest-magnitude loading is positive. Missing components
/// (fewer than three channels) are zero.
GridTensor pca_project(const GridTensor& grid);

/// pca_project with each component min-max scaled to 0..255, as an RGB PNG.
std::string pca_preview_png(const GridTensor& grid);

}  // namespace dragforge
