// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/mask.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dragforge {

void DragInstruction::validate() const {
  if (pairs.empty()) throw ParameterError("drag instruction needs at least one pair");
  if (n_steps < 1) throw ParameterError("n_steps must be >= 1");
  if (n_max < n_steps) throw ParameterError("n_max must be >= n_steps");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be a positive finite number");
  }
  if (!(stop_radius >= 0.0) || !std::isfinite(stop_radius)) {
    throw ParameterError("stop radius must be a non-negative finite number");
  }
}

void DragInstruction::check_bounds(int height, int width) const {
  auto check = [&](const Point& p, std::size_t i, const char* role) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= width - 1 && p.y <= height - 1)) {
      throw BoundsError(std::string(role) + " of pair " + std::to_string(i) + " at " +
                        describe(p) + " is outside the " + std::to_string(width) + "x" +
                        std::to_string(height) + " grid");
    }
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    check(pairs[i].handle, i, "handle");
    check(pairs[i].target, i, "target");
  }
}

Mask::Mask(int h, int w, bool fill)
    : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<Pixel> segment_pixels(const Point& a, const Point& b) {
  const double len = distance(a, b);
  std::vector<double> params{0.0, 1.0};
  if (len > 0.0) {
    const int n = static_cast<int>(std::ceil(len / 0.5));
    for (int i = 1; i < n; ++i) params.push_back(static_cast<double>(i) / n);
    auto crossings = [&](double p0, double p1) {
      if (p0 == p1) return;
      const double lo = std::min(p0, p1), hi = std::max(p0, p1);
      for (double m = std::floor(lo - 0.5) + 0.5; m <= hi; m += 1.0) {
        const double s = (m - p0) / (p1 - p0);
        if (s > 0.0 && s < 1.0) params.push_back(s);
      }
    };
    crossings(a.x, b.x);
    crossings(a.y, b.y);
  }
  std::sort(params.begin(), params.end());
  params.erase(std::unique(params.begin(), params.end()), params.end());

  std::vector<double> samples;
  for (std::size_t i = 0; i < params.size(); ++i) {
    samples.push_back(params[i]);
    if (i + 1 < params.size()) samples.push_back(0.5 * (params[i] + params[i + 1]));
  }
  std::vector<Pixel> out;
  std::set<Pixel> seen;
  for (double s : samples) {
    const Point p{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
    const Pixel px = nearest_pixel(p);
    if (seen.insert(px).second) out.push_back(px);
  }
  return out;
}

std::vector<int> mask_labels(const Segmentation& seg, const DragInstruction& instr) {
  validate_segmentation(seg);
  instr.check_bounds(seg.height, seg.width);
  std::set<int> labels;
  for (const auto& pair : instr.pairs) {
    labels.insert(label_at(seg, pair.handle));
    for (const Pixel& px : segment_pixels(pair.handle, pair.target)) {
      labels.insert(seg.label(px.y, px.x));
    }
  }
  return {labels.begin(), labels.end()};
}

Mask mask_from_labels(const Segmentation& seg, const std::vector<int>& labels) {
  Mask m(seg.height, seg.width);
  std::vector<std::uint8_t> wanted(seg.n_patches, 0);
  for (int l : labels) {
    if (l < 0 || l >= seg.n_patches) throw ParameterError("mask label out of range");
    wanted[l] = 1;
  }
  for (std::size_t i = 0; i < seg.labels.size(); ++i) m.bits[i] = wanted[seg.labels[i]];
  m.source_labels = labels;
  std::sort(m.source_labels.begin(), m.source_labels.end());
  m.source_labels.erase(std::unique(m.source_labels.begin(), m.source_labels.end()),
                        m.source_labels.end());
  return m;
}

Mask generate_mask(const Segmentation& seg, const DragInstruction& instr, int dilation) {
  if (dilation < 0) throw ParameterError("mask dilation must be >= 0");
  Mask m = mask_from_labels(seg, mask_labels(seg, instr));
  return dilation > 0 ? dilate(m, dilation) : m;
}

Mask dilate(const Mask& mask, int radius) {
  if (radius < 0) throw ParameterError("dilation radius must be >= 0");
  if (radius == 0) return mask;
  // Separable: a square dilation is a row pass followed by a column pass.
  Mask rows(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      for (int dx = std::max(0, x - radius); dx <= std::min(mask.width - 1, x + radius); ++dx) {
        rows.set(y, dx);
      }
    }
  }
  Mask out(mask.height, mask.width);
  out.source_labels = mask.source_labels;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!rows.at(y, x)) continue;
      for (int dy = std::max(0, y - radius); dy <= std::min(mask.height - 1, y + radius); ++dy) {
        out.set(dy, x);
      }
    }
  }
  return out;
}

GridTensor mask_complement_weighting(const Mask& mask) {
  GridTensor g(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) g.values()[i] = mask.bits[i] ? 0.0f : 1.0f;
  return g;
}

}  // namespace dragforge
