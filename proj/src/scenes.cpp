// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/scenes.hpp"

namespace dragforge {

namespace {

constexpr int kSide = 64;
constexpr float kContrast = 20.0f;

}  // namespace

Scene bump_scene() {
  Scene s;
  s.latent = GridTensor(kSide, kSide, 4);
  s.features = GridTensor(kSide, kSide, 1);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const double dx = x - 24.0, dy = y - 24.0;
      if (dx * dx + dy * dy > 81.0) s.features.at(y, x) = kContrast;
    }
  }
  BumpParams bump;
  bump.base_center = {20.0, 24.0};
  s.field = FeatureField(bump);
  s.instruction.pairs = {{{20.0, 24.0}, {28.0, 24.0}}};
  s.instruction.n_steps = 16;
  s.instruction.stop_radius = 2.0;
  s.slic.n_patches = 16;
  return s;
}

Scene two_material_scene(const TwoMaterialOptions& opt) {
  if (opt.texture_row < 25 || opt.texture_row > kSide - 1) {
    throw ParameterError("texture row must lie in [25, 63]");
  }
  Scene s;
  s.latent = GridTensor(kSide, kSide, 5);
  s.features = GridTensor(kSide, kSide, 2);
  GridTensor gate(kSide, kSide, 1);
  SceneRng rng(opt.seed);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      if (y >= opt.texture_row) {
        s.features.at(y, x, 1) = kContrast;
        gate.at(y, x) = 1.0f;
        // Channel 0 stays well below the crest height, so texture alone never resembles
        // the bump crest. Only where the bump's flank overlaps it can it look similar.
        const double a = opt.texture_amplitude;
        s.latent.at(y, x, 2) = static_cast<float>(rng.uniform(-a, opt.texture_ceiling));
        s.latent.at(y, x, 3) = static_cast<float>(rng.uniform(-0.5 * a, 0.5 * a));
        s.latent.at(y, x, 4) = static_cast<float>(rng.uniform(-0.5 * a, 0.5 * a));
      } else if (!(x >= 10 && x <= 38 && y >= 14)) {
        s.features.at(y, x, 0) = kContrast;
      }
    }
  }
  BumpParams bump;
  bump.base_center = {20.0, 24.0};
  bump.passthrough = std::move(gate);
  s.field = FeatureField(bump);
  s.instruction.pairs = {{{20.0, 24.0}, {28.0, 24.0}}};
  s.instruction.n_steps = 16;
  s.instruction.stop_radius = 0.5;
  s.slic.n_patches = 16;
  return s;
}

Scene grid16_scene() {
  Scene s;
  s.latent = GridTensor(kSide, kSide, 1);
  s.features = GridTensor(kSide, kSide, 1, 0.5f);
  s.field = FeatureField::identity();
  s.instruction.pairs = {{{8.0, 8.0}, {8.0, 40.0}}};
  s.slic.n_patches = 16;
  return s;
}

}  // namespace dragforge
