// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

namespace dragforge {

namespace {

struct Center {
  double x = 0.0, y = 0.0;
  std::vector<double> f;
};

double joint_distance2(const GridTensor& features, int y, int x, const Center& c,
                       double spatial_weight2) {
  double df = 0.0;
  const auto px = features.pixel(y, x);
  for (std::size_t ch = 0; ch < px.size(); ++ch) {
    const double d = px[ch] - c.f[ch];
    df += d * d;
  }
  const double dx = x - c.x, dy = y - c.y;
  return df + spatial_weight2 * (dx * dx + dy * dy);
}

void check_features(const GridTensor& features) {
  for (float v : features.values()) {
    if (!std::isfinite(v)) throw DataError("SLIC features contain non-finite values");
  }
}

}  // namespace

std::pair<int, int> slic_grid_layout(int n_patches, int height, int width) {
  std::tuple<int, double, int> best{std::numeric_limits<int>::max(), 0.0, 0};
  std::pair<int, int> layout{1, 1};
  for (int nx = 1; nx <= std::min(n_patches, width); ++nx) {
    const int ny = std::clamp(static_cast<int>(std::lround(static_cast<double>(n_patches) / nx)),
                              1, height);
    const double aspect =
        std::abs(std::log((static_cast<double>(width) / nx) / (static_cast<double>(height) / ny)));
    const std::tuple<int, double, int> score{std::abs(nx * ny - n_patches), aspect, -nx};
    if (score < best) {
      best = score;
      layout = {nx, ny};
    }
  }
  return layout;
}

std::vector<Point> slic_initial_centers(int n_patches, int height, int width) {
  const auto [nx, ny] = slic_grid_layout(n_patches, height, width);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      pts.push_back({(i + 0.5) * width / nx - 0.5, (j + 0.5) * height / ny - 0.5});
    }
  }
  return pts;
}

Segmentation slic_segment(const GridTensor& features, const SlicOptions& opt, SlicTrace* trace) {
  const int h = features.height(), w = features.width(), nc = features.channels();
  if (opt.n_patches < 1) throw ParameterError("n_patches must be >= 1");
  if (static_cast<long long>(opt.n_patches) > static_cast<long long>(h) * w) {
    throw ParameterError("n_patches " + std::to_string(opt.n_patches) + " exceeds pixel count " +
                         std::to_string(static_cast<long long>(h) * w));
  }
  if (!(opt.compactness > 0.0)) throw ParameterError("compactness must be > 0");
  if (opt.max_iters < 1) throw ParameterError("max_iters must be >= 1");
  check_features(features);

  const double step = std::sqrt(static_cast<double>(h) * w / opt.n_patches);
  const double sw2 = (opt.compactness / step) * (opt.compactness / step);

  std::vector<Center> centers;
  for (const Point& p : slic_initial_centers(opt.n_patches, h, w)) {
    const auto f = bilinear_sample(features, p);
    centers.push_back({p.x, p.y, std::vector<double>(f.begin(), f.end())});
  }
  const int k_count = static_cast<int>(centers.size());

  const std::size_t npx = static_cast<std::size_t>(h) * w;
  std::vector<int> labels(npx, -1);
  std::vector<double> dist(npx);

  for (int iter = 0; iter < opt.max_iters; ++iter) {
    std::vector<int> next(npx, -1);
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    // A pixel may always stay with its current center, which keeps the objective monotone.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (labels[i] >= 0) {
          next[i] = labels[i];
          dist[i] = joint_distance2(features, y, x, centers[labels[i]], sw2);
        }
      }
    }
    for (int k = 0; k < k_count; ++k) {
      const Center& c = centers[k];
      const int y0 = std::max(0, static_cast<int>(std::floor(c.y - step)) - 1);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + step)) + 1);
      const int x0 = std::max(0, static_cast<int>(std::floor(c.x - step)) - 1);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + step)) + 1);
      for (int y = y0; y <= y1; ++y) {
        if (std::abs(y - c.y) > step) continue;
        for (int x = x0; x <= x1; ++x) {
          if (std::abs(x - c.x) > step) continue;
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const double d = joint_distance2(features, y, x, c, sw2);
          if (d < dist[i] || (d == dist[i] && k < next[i])) {
            dist[i] = d;
            next[i] = k;
          }
        }
      }
    }
    // Pixels no window reached fall back to the globally nearest center.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (next[i] >= 0) continue;
        for (int k = 0; k < k_count; ++k) {
          const double d = joint_distance2(features, y, x, centers[k], sw2);
          if (d < dist[i]) {
            dist[i] = d;
            next[i] = k;
          }
        }
      }
    }

    int changed = 0;
    for (std::size_t i = 0; i < npx; ++i) changed += next[i] != labels[i];
    labels.swap(next);
    if (trace) {
      trace->objective.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
      trace->changed.push_back(changed);
    }

    std::vector<Center> sums(k_count, Center{0.0, 0.0, std::vector<double>(nc, 0.0)});
    std::vector<int> counts(k_count, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int k = labels[static_cast<std::size_t>(y) * w + x];
        auto& s = sums[k];
        s.x += x;
        s.y += y;
        const auto px = features.pixel(y, x);
        for (int ch = 0; ch < nc; ++ch) s.f[ch] += px[ch];
        ++counts[k];
      }
    }
    for (int k = 0; k < k_count; ++k) {
      if (counts[k] == 0) continue;
      const double n = counts[k];
      centers[k].x = sums[k].x / n;
      centers[k].y = sums[k].y / n;
      for (int ch = 0; ch < nc; ++ch) centers[k].f[ch] = sums[k].f[ch] / n;
    }
    if (changed == 0) break;
  }

  Segmentation seg;
  seg.height = h;
  seg.width = w;
  seg.labels = std::move(labels);
  seg.n_patches = k_count;
  seg.compactness = opt.compactness;
  recompute_centers(seg, &features);
  if (opt.enforce_connectivity) {
    seg = enforce_connectivity(seg);
    recompute_centers(seg, &features);
  }
  return seg;
}

Segmentation enforce_connectivity(const Segmentation& seg) {
  validate_segmentation(seg);
  const int h = seg.height, w = seg.width;
  const std::size_t npx = static_cast<std::size_t>(h) * w;

  // 4-connected components, numbered in scan order of their first pixel.
  std::vector<int> comp(npx, -1);
  std::vector<int> comp_label, comp_size;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < npx; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_label.size());
    const int lab = seg.labels[start];
    comp_label.push_back(lab);
    comp_size.push_back(0);
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      ++comp_size[id];
      const int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int n = 0; n < 4; ++n) {
        if (ny[n] < 0 || ny[n] >= h || nx[n] < 0 || nx[n] >= w) continue;
        const std::size_t j = static_cast<std::size_t>(ny[n]) * w + nx[n];
        if (comp[j] < 0 && seg.labels[j] == lab) {
          comp[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  const int n_comp = static_cast<int>(comp_label.size());

  // The largest piece of each label (first in scan order on ties) keeps the label.
  std::vector<int> main_comp(seg.n_patches, -1);
  for (int c = 0; c < n_comp; ++c) {
    int& m = main_comp[comp_label[c]];
    if (m < 0 || comp_size[c] > comp_size[m]) m = c;
  }

  std::vector<std::vector<int>> adjacent(n_comp);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = comp[static_cast<std::size_t>(y) * w + x];
      if (x + 1 < w) {
        const int b = comp[static_cast<std::size_t>(y) * w + x + 1];
        if (a != b) {
          adjacent[a].push_back(b);
          adjacent[b].push_back(a);
        }
      }
      if (y + 1 < h) {
        const int b = comp[static_cast<std::size_t>(y + 1) * w + x];
        if (a != b) {
          adjacent[a].push_back(b);
          adjacent[b].push_back(a);
        }
      }
    }
  }

  std::vector<int> root(n_comp);
  std::iota(root.begin(), root.end(), 0);
  std::vector<int> region_size = comp_size;
  std::vector<std::vector<int>> members(n_comp);
  for (int c = 0; c < n_comp; ++c) members[c] = {c};
  auto find = [&](int c) {
    while (root[c] != c) c = root[c] = root[root[c]];
    return c;
  };

  const double threshold = static_cast<double>(npx) / seg.n_patches / 4.0;
  std::vector<int> orphans;
  for (int c = 0; c < n_comp; ++c) {
    if (main_comp[comp_label[c]] != c && comp_size[c] < threshold) orphans.push_back(c);
  }
  std::stable_sort(orphans.begin(), orphans.end(),
                   [&](int a, int b) { return comp_size[a] < comp_size[b]; });

  for (int c : orphans) {
    const int r = find(c);
    int target = -1;
    for (int m : members[r]) {
      for (int nb : adjacent[m]) {
        const int nr = find(nb);
        if (nr == r) continue;
        if (target < 0 || region_size[nr] > region_size[target] ||
            (region_size[nr] == region_size[target] && nr < target)) {
          target = nr;
        }
      }
    }
    if (target < 0) continue;
    root[r] = target;
    region_size[target] += region_size[r];
    members[target].insert(members[target].end(), members[r].begin(), members[r].end());
    members[r].clear();
  }

  // Surviving regions: main pieces keep their label, everything else is appended.
  std::vector<int> region_label(n_comp, -1);
  int next_label = seg.n_patches;
  for (int c = 0; c < n_comp; ++c) {
    if (find(c) != c) continue;
    region_label[c] = main_comp[comp_label[c]] == c ? comp_label[c] : next_label++;
  }
  // Compact the label range, preserving order.
  std::vector<int> used(next_label, 0);
  for (int c = 0; c < n_comp; ++c) {
    if (region_label[c] >= 0) used[region_label[c]] = 1;
  }
  std::vector<int> remap(next_label, -1);
  int n_out = 0;
  for (int l = 0; l < next_label; ++l) {
    if (used[l]) remap[l] = n_out++;
  }

  Segmentation out;
  out.height = h;
  out.width = w;
  out.n_patches = n_out;
  out.compactness = seg.compactness;
  out.labels.resize(npx);
  std::vector<int> source_label(n_out, -1);
  for (std::size_t i = 0; i < npx; ++i) {
    const int r = find(comp[i]);
    out.labels[i] = remap[region_label[r]];
    source_label[out.labels[i]] = comp_label[r];
  }
  out.centers.resize(n_out);
  for (int l = 0; l < n_out; ++l) {
    const int src = source_label[l];
    if (src >= 0 && src < static_cast<int>(seg.centers.size())) {
      out.centers[l].feature = seg.centers[src].feature;
    }
  }
  recompute_centers(out, nullptr);
  return out;
}

void recompute_centers(Segmentation& seg, const GridTensor* features) {
  const int nc = features ? features->channels() : 0;
  std::vector<double> sx(seg.n_patches, 0.0), sy(seg.n_patches, 0.0);
  std::vector<double> sf(static_cast<std::size_t>(seg.n_patches) * nc, 0.0);
  std::vector<int> count(seg.n_patches, 0);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      const int l = seg.label(y, x);
      sx[l] += x;
      sy[l] += y;
      ++count[l];
      if (features) {
        const auto px = features->pixel(y, x);
        for (int c = 0; c < nc; ++c) sf[static_cast<std::size_t>(l) * nc + c] += px[c];
      }
    }
  }
  seg.centers.resize(seg.n_patches);
  for (int l = 0; l < seg.n_patches; ++l) {
    auto& c = seg.centers[l];
    c.size = count[l];
    if (count[l] == 0) continue;
    c.centroid = {sx[l] / count[l], sy[l] / count[l]};
    if (features) {
      c.feature.assign(nc, 0.0f);
      for (int ch = 0; ch < nc; ++ch) {
        c.feature[ch] = static_cast<float>(sf[static_cast<std::size_t>(l) * nc + ch] / count[l]);
      }
    }
  }
}

void validate_segmentation(const Segmentation& seg) {
  if (seg.height < 1 || seg.width < 1) throw DataError("segmentation has empty extent");
  if (seg.labels.size() != static_cast<std::size_t>(seg.height) * seg.width) {
    throw DataError("segmentation label count does not match its extent");
  }
  if (seg.n_patches < 1) throw DataError("segmentation has no patches");
  for (int l : seg.labels) {
    if (l < 0 || l >= seg.n_patches) {
      throw DataError("label " + std::to_string(l) + " outside [0, " +
                      std::to_string(seg.n_patches) + ")");
    }
  }
}

int label_at(const Segmentation& seg, const Point& p) {
  if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= seg.width - 1 && p.y <= seg.height - 1)) {
    throw BoundsError("point " + describe(p) + " outside " + std::to_string(seg.width) + "x" +
                      std::to_string(seg.height) + " segmentation");
  }
  const Pixel px = nearest_pixel(p);
  return seg.label(px.y, px.x);
}

std::vector<Pixel> pixels_with_label(const Segmentation& seg, int label) {
  std::vector<Pixel> out;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      if (seg.label(y, x) == label) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<Pixel> region_of(const Segmentation& seg, const Point& p) {
  return pixels_with_label(seg, label_at(seg, p));
}

GridTensor labels_to_grid(const Segmentation& seg) {
  GridTensor g(seg.height, seg.width, 1);
  for (std::size_t i = 0; i < seg.labels.size(); ++i) g.values()[i] = static_cast<float>(seg.labels[i]);
  return g;
}

Segmentation segmentation_from_grid(const GridTensor& grid) {
  if (grid.channels() != 1) throw DataError("label grid must have a single channel");
  Segmentation seg;
  seg.height = grid.height();
  seg.width = grid.width();
  seg.labels.resize(grid.size());
  int max_label = -1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const float v = grid.values()[i];
    if (v < 0.0f || v != std::floor(v)) throw DataError("label grid holds a non-label value");
    seg.labels[i] = static_cast<int>(v);
    max_label = std::max(max_label, seg.labels[i]);
  }
  seg.n_patches = max_label + 1;
  recompute_centers(seg, nullptr);
  return seg;
}

}  // namespace dragforge
