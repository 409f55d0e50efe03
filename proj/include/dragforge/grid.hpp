// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dragforge/errors.hpp"

namespace dragforge {

/// Continuous pixel coordinate. x runs along width, y along height.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Integer pixel coordinate. Orders in scan order, i.e. by (y, x).
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend bool operator<(const Pixel& a, const Pixel& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

inline double distance(const Point& a, const Point& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Rounds to the nearest integer, ties away from zero.
inline int round_half_away(double v) { return static_cast<int>(std::lround(v)); }

inline Pixel nearest_pixel(const Point& p) {
  return {round_half_away(p.x), round_half_away(p.y)};
}

inline Point to_point(const Pixel& p) {
  return {static_cast<double>(p.x), static_cast<double>(p.y)};
}

std::string describe(const Point& p);

/// Dense H x W x C array stored row-major in (y, x, c) order.
template <class T>
class BasicGrid {
 public:
  using value_type = T;

  BasicGrid() = default;

  BasicGrid(int height, int width, int channels, T fill = T{0})
      : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  BasicGrid(int height, int width, int channels, std::vector<T> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
      throw ShapeError("grid data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(height) + "x" +
                       std::to_string(width) + "x" + std::to_string(channels));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<T> pixel(int y, int x) {
    return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)};
  }
  std::span<const T> pixel(int y, int x) const {
    return {data_.data() + index(y, x), static_cast<std::size_t>(channels_)};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool contains(const Point& p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1 && p.y <= height_ - 1;
  }
  bool contains(const Pixel& p) const {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
  }

  bool same_shape(const BasicGrid& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  bool same_spatial(int h, int w) const { return height_ == h && width_ == w; }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_);
  }

  friend bool operator==(const BasicGrid&, const BasicGrid&) = default;

 private:
  static void check_dims(int h, int w, int c) {
    if (h < 1 || w < 1 || c < 1) {
      throw ShapeError("grid dimensions must be positive, got " + std::to_string(h) + "x" +
                       std::to_string(w) + "x" + std::to_string(c));
    }
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using GridTensor = BasicGrid<float>;
using GridTensorD = BasicGrid<double>;

template <class To, class From>
BasicGrid<To> grid_cast(const BasicGrid<From>& g) {
  std::vector<To> out(g.size());
  auto in = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(in[i]);
  return BasicGrid<To>(g.height(), g.width(), g.channels(), std::move(out));
}

/// Throws NumericError naming the first non-finite entry.
template <class T>
void require_finite(const BasicGrid<T>& g, const std::string& what) {
  auto v = g.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      const auto c = static_cast<int>(i % g.channels());
      const auto px = i / g.channels();
      throw NumericError(what + " has non-finite value at (y=" +
                         std::to_string(px / g.width()) + ", x=" +
                         std::to_string(px % g.width()) + ", c=" + std::to_string(c) + ")");
    }
  }
}

/// Corner indices and weights of a bilinear interpolation.
struct BilinearStencil {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double w00 = 1.0, w01 = 0.0, w10 = 0.0, w11 = 0.0;  // w{dy}{dx}
};

/// Throws BoundsError when q lies outside [0, width-1] x [0, height-1].
BilinearStencil bilinear_stencil(int height, int width, const Point& q);

template <class T>
std::vector<T> bilinear_sample(const BasicGrid<T>& grid, const Point& q) {
  const auto s = bilinear_stencil(grid.height(), grid.width(), q);
  std::vector<T> out(grid.channels());
  for (int c = 0; c < grid.channels(); ++c) {
    const double v = s.w00 * grid.at(s.y0, s.x0, c) + s.w01 * grid.at(s.y0, s.x1, c) +
                     s.w10 * grid.at(s.y1, s.x0, c) + s.w11 * grid.at(s.y1, s.x1, c);
    out[c] = static_cast<T>(v);
  }
  return out;
}

}  // namespace dragforge
