// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/preview.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dragforge/png.hpp"

namespace dragforge {

GridTensor pca_project(const GridTensor& grid) {
  const int n = grid.height() * grid.width();
  const int c = grid.channels();
  Eigen::MatrixXd x(n, c);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < c; ++k) x(i, k) = grid.values()[static_cast<std::size_t>(i) * c + k];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  GridTensor out(grid.height(), grid.width(), 3);
  const int m = std::min(3, c);
  for (int j = 0; j < m; ++j) {
    // Eigenvalues come in ascending order.
    Eigen::VectorXd v = eig.eigenvectors().col(c - 1 - j);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    const Eigen::VectorXd proj = x * v;
    for (int i = 0; i < n; ++i) out.values()[static_cast<std::size_t>(i) * 3 + j] = proj(i);
  }
  return out;
}

std::string pca_preview_png(const GridTensor& grid) {
  const GridTensor p = pca_project(grid);
  const std::size_t n = static_cast<std::size_t>(p.height()) * p.width();
  std::vector<std::uint8_t> rgb(n * 3, 0);
  for (int j = 0; j < 3; ++j) {
    float lo = p.values()[j], hi = p.values()[j];
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, p.values()[i * 3 + j]);
      hi = std::max(hi, p.values()[i * 3 + j]);
    }
    if (!(hi > lo)) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = (p.values()[i * 3 + j] - lo) / (static_cast<double>(hi) - lo);
      rgb[i * 3 + j] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
  }
  return encode_rgb_png(p.height(), p.width(), rgb);
}

}  // namespace dragforge
