// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

// Random feature-field parameters shared by the unit and acceptance tests.

#pragma once

#include <cstdint>

#include "dragforge/field.hpp"
#include "oracles.hpp"

namespace fixture {

using namespace dragforge;

inline LinearConvParams random_conv(int in, int out, int k, std::uint64_t seed) {
  LinearConvParams p;
  p.in_channels = in;
  p.out_channels = out;
  p.kernel_size = k;
  SceneRng rng(seed);
  for (int i = 0; i < in * out * k * k; ++i) p.weights.push_back(static_cast<float>(rng.uniform(-1, 1)));
  for (int i = 0; i < out; ++i) p.bias.push_back(static_cast<float>(rng.uniform(-1, 1)));
  return p;
}

inline BumpParams random_bump(int h, int w, std::uint64_t seed) {
  BumpParams p;
  p.amplitude = 1.3;
  p.sigma = 2.0;
  p.slope = 0.7;
  p.base_center = {7.5, 8.0};
  p.gain = 6.0;
  p.window = 2.5;
  p.background = oracle::random_grid<float>(h, w, 3, seed + 1, -0.2, 0.2);
  p.passthrough = oracle::random_grid<float>(h, w, 1, seed + 2, 0.0, 1.0);
  p.passthrough_channel = 2;
  return p;
}

inline TabulatedParams random_table(int h, int w, std::uint64_t seed) {
  TabulatedParams p;
  p.table = oracle::random_grid<float>(h, w, 3, seed);
  p.scale = 1.5;
  return p;
}

}  // namespace fixture
