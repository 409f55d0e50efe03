// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <limits>
#include <map>

#include "doctest.h"
#include "dragforge/superpixel.hpp"
#include "oracles.hpp"

using namespace dragforge;

namespace {

GridTensor two_region(int h, int w, float contrast) {
  GridTensor f(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = w / 2; x < w; ++x) f.at(y, x) = contrast;
  }
  return f;
}

Segmentation from_labels(int h, int w, std::vector<int> labels) {
  Segmentation s;
  s.height = h;
  s.width = w;
  s.labels = std::move(labels);
  s.n_patches = *std::max_element(s.labels.begin(), s.labels.end()) + 1;
  recompute_centers(s, nullptr);
  return s;
}

/// Largest distance from a pixel whose label disagrees with the regular grid cell to the
/// nearest cell boundary. Labels are matched to cells by majority.
int grid_deviation(const Segmentation& seg, int cells_x, int cells_y) {
  const int cw = seg.width / cells_x, ch = seg.height / cells_y;
  std::map<int, std::map<int, int>> votes;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) ++votes[seg.label(y, x)][(y / ch) * cells_x + x / cw];
  }
  std::map<int, int> cell_of;
  for (const auto& [label, v] : votes) {
    cell_of[label] = std::max_element(v.begin(), v.end(), [](auto& a, auto& b) {
                       return a.second < b.second;
                     })->first;
  }
  int worst = 0;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      if (cell_of[seg.label(y, x)] == (y / ch) * cells_x + x / cw) continue;
      const int dx = std::min(x % cw, cw - 1 - x % cw);
      const int dy = std::min(y % ch, ch - 1 - y % ch);
      worst = std::max(worst, std::min(dx, dy) + 1);
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("superpixel") {
  TEST_CASE("constant features recover the 4 x 4 grid partition") {
    const GridTensor f(64, 64, 1, 0.5f);
    const Segmentation seg = slic_segment(f, {16, 10.0, 10, true});
    CHECK(seg.n_patches == 16);
    CHECK(grid_deviation(seg, 4, 4) <= 2);
  }

  TEST_CASE("very large compactness yields the grid partition regardless of features") {
    const auto f = oracle::random_grid<float>(64, 64, 3, 3, 0.0, 5.0);
    const Segmentation seg = slic_segment(f, {16, 1e6, 10, true});
    CHECK(grid_deviation(seg, 4, 4) <= 2);
  }

  TEST_CASE("two-region features split at the discontinuity") {
    const GridTensor f = two_region(32, 32, 100.0f);
    const Segmentation seg = slic_segment(f, {2, 0.1, 10, true});
    REQUIRE(seg.n_patches == 2);
    // Each row switches label exactly once, within one pixel of column 16.
    for (int y = 0; y < 32; ++y) {
      int switches = 0, at = -1;
      for (int x = 1; x < 32; ++x) {
        if (seg.label(y, x) != seg.label(y, x - 1)) {
          ++switches;
          at = x;
        }
      }
      CHECK(switches == 1);
      CHECK(std::abs(at - 16) <= 1);
    }
    // 2-means fixed point in the joint space: no pixel prefers the other cluster.
    const double s = std::sqrt(32.0 * 32.0 / 2.0), m2 = (0.1 / s) * (0.1 / s);
    double mx[2] = {}, my[2] = {}, mf[2] = {};
    int n[2] = {};
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const int k = seg.label(y, x);
        mx[k] += x;
        my[k] += y;
        mf[k] += f.at(y, x);
        ++n[k];
      }
    }
    for (int k = 0; k < 2; ++k) {
      mx[k] /= n[k];
      my[k] /= n[k];
      mf[k] /= n[k];
    }
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        auto d = [&](int k) {
          return (f.at(y, x) - mf[k]) * (f.at(y, x) - mf[k]) +
                 m2 * ((x - mx[k]) * (x - mx[k]) + (y - my[k]) * (y - my[k]));
        };
        const int k = seg.label(y, x);
        CHECK(d(k) <= d(1 - k));
      }
    }
  }

  TEST_CASE("checkerboard segmentation equals the reference implementation") {
    for (int square : {1, 2, 4}) {
      GridTensor f(8, 8, 1);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) f.at(y, x) = ((x / square + y / square) % 2) ? 1.0f : 0.0f;
      }
      for (double m : {0.5, 2.0, 10.0}) {
        const auto [nx, ny] = slic_grid_layout(4, 8, 8);
        const auto expect = oracle::reference_slic(f, nx, ny, m, 4);
        const Segmentation seg = slic_segment(f, {4, m, 1000, false});
        INFO("square " << square << " compactness " << m);
        CHECK(seg.labels == expect);
      }
    }
  }

  TEST_CASE("random features match the reference implementation") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto f = oracle::random_grid<float>(12, 10, 2, 900 + seed, 0.0, 3.0);
      const auto [nx, ny] = slic_grid_layout(6, 12, 10);
      const auto expect = oracle::reference_slic(f, nx, ny, 5.0, 6);
      CHECK(slic_segment(f, {6, 5.0, 1000, false}).labels == expect);
    }
  }

  TEST_CASE("objective is non-increasing across assignment passes") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto f = oracle::random_grid<float>(64, 64, 3, 70 + seed, 0.0, 4.0);
      SlicTrace trace;
      slic_segment(f, {64, 10.0, 10, true}, &trace);
      REQUIRE(trace.objective.size() >= 2);
      for (std::size_t i = 1; i < trace.objective.size(); ++i) {
        CHECK(trace.objective[i] <= trace.objective[i - 1] * (1.0 + 1e-12));
      }
    }
  }

  TEST_CASE("labels cover the grid and are 4-connected, within the time budget") {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto f = oracle::random_grid<float>(64, 64, 4, 10 + seed, 0.0, 20.0);
      const Segmentation seg = slic_segment(f, {64, 10.0, 10, true});
      CHECK_NOTHROW(validate_segmentation(seg));
      CHECK(seg.labels.size() == 64u * 64u);
      for (int l : seg.labels) CHECK((l >= 0 && l < seg.n_patches));
      CHECK(oracle::labels_are_connected(seg));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 5.0);
  }

  TEST_CASE("connected segmentation is a fixed point of connectivity enforcement") {
    const Segmentation seg = slic_segment(GridTensor(64, 64, 1, 0.5f), {16, 10.0, 10, false});
    REQUIRE(oracle::labels_are_connected(seg));
    CHECK(enforce_connectivity(seg).labels == seg.labels);
  }

  TEST_CASE("a one-pixel orphan merges into its only neighbour") {
    std::vector<int> labels(6 * 6, 0);
    for (int y = 0; y < 6; ++y) {
      for (int x = 3; x < 6; ++x) labels[y * 6 + x] = 1;
    }
    labels[1 * 6 + 1] = 1;  // island of label 1 inside label 0
    const Segmentation out = enforce_connectivity(from_labels(6, 6, labels));
    CHECK(out.label(1, 1) == out.label(0, 0));
    CHECK(oracle::labels_are_connected(out));
  }

  TEST_CASE("random label noise passes the flood-fill audit after enforcement") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SceneRng rng(seed);
      std::vector<int> labels(16 * 16);
      for (auto& l : labels) l = static_cast<int>(rng.uniform() * 8);
      labels[0] = 7;  // keep all eight labels present
      for (int k = 0; k < 8; ++k) labels[k + 1] = k;
      const Segmentation out = enforce_connectivity(from_labels(16, 16, labels));
      CHECK(out.labels.size() == labels.size());
      CHECK_NOTHROW(validate_segmentation(out));
      CHECK(oracle::labels_are_connected(out));
    }
  }

  TEST_CASE("region_of returns the whole label set of the rounded point") {
    const Segmentation one = from_labels(4, 5, std::vector<int>(20, 0));
    CHECK(region_of(one, {2.2, 1.7}).size() == 20);

    std::vector<int> halves(20 * 20);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 20; ++x) halves[y * 20 + x] = x < 10 ? 0 : 1;
    }
    const Segmentation seg = from_labels(20, 20, halves);
    const auto left = region_of(seg, {9.4, 5.0});
    CHECK(left.size() == 200);
    for (const Pixel& p : left) CHECK(p.x < 10);
    CHECK(region_of(seg, {9.5, 5.0})[0].x == 10);  // half rounds away from zero

    const Segmentation grid = slic_segment(GridTensor(64, 64, 1, 0.5f), {16, 10.0, 10, true});
    CHECK(region_of(grid, {0.4, 0.6}) == region_of(grid, {0, 1}));
    CHECK_THROWS_AS(region_of(grid, {-0.6, 3}), BoundsError);
    CHECK_THROWS_AS(region_of(grid, {3, 63.6}), BoundsError);
  }

  TEST_CASE("region_of is invariant under relabelling") {
    const auto f = oracle::random_grid<float>(32, 32, 2, 5, 0.0, 10.0);
    const Segmentation seg = slic_segment(f, {16, 10.0, 10, true});
    Segmentation perm = seg;
    for (int& l : perm.labels) l = seg.n_patches - 1 - l;
    SceneRng rng(3);
    for (int i = 0; i < 20; ++i) {
      const Point p{rng.uniform(0, 31), rng.uniform(0, 31)};
      CHECK(region_of(seg, p) == region_of(perm, p));
    }
  }

  TEST_CASE("invalid arguments") {
    const GridTensor f(4, 4, 1);
    CHECK_THROWS_AS(slic_segment(f, {17, 10.0, 10, true}), ParameterError);
    CHECK_THROWS_AS(slic_segment(f, {0, 10.0, 10, true}), ParameterError);
    CHECK_THROWS_AS(slic_segment(f, {4, 0.0, 10, true}), ParameterError);
    CHECK_THROWS_AS(slic_segment(f, {4, 10.0, 0, true}), ParameterError);
    GridTensor bad(4, 4, 1);
    bad.at(2, 2) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(slic_segment(bad, {4, 10.0, 10, true}), DataError);
  }

  TEST_CASE("label grid round trip") {
    const Segmentation seg = slic_segment(GridTensor(64, 64, 1, 0.5f), {16, 10.0, 10, true});
    CHECK(segmentation_from_grid(labels_to_grid(seg)).labels == seg.labels);
  }
}
