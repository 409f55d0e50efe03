// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/grid.hpp"

#include <cstdio>

namespace dragforge {

std::string describe(const Point& p) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%.6g, %.6g)", p.x, p.y);
  return buf;
}

BilinearStencil bilinear_stencil(int height, int width, const Point& q) {
  if (!(q.x >= 0.0 && q.y >= 0.0 && q.x <= width - 1 && q.y <= height - 1)) {
    throw BoundsError("sample point " + describe(q) + " outside " + std::to_string(width) +
                      "x" + std::to_string(height) + " grid");
  }
  BilinearStencil s;
  s.x0 = static_cast<int>(std::floor(q.x));
  s.y0 = static_cast<int>(std::floor(q.y));
  double fx = q.x - s.x0;
  double fy = q.y - s.y0;
  s.x1 = s.x0 + 1;
  s.y1 = s.y0 + 1;
  if (s.x1 >= width) {
    s.x1 = s.x0;
    fx = 0.0;
  }
  if (s.y1 >= height) {
    s.y1 = s.y0;
    fy = 0.0;
  }
  s.w00 = (1.0 - fx) * (1.0 - fy);
  s.w01 = fx * (1.0 - fy);
  s.w10 = (1.0 - fx) * fy;
  s.w11 = fx * fy;
  return s;
}

}  // namespace dragforge
