// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "dragforge/field.hpp"
#include "dragforge/grid.hpp"
#include "dragforge/mask.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

/// A synthetic editing problem: latent, segmentation features, feature field and drag.
struct Scene {
  GridTensor latent;
  GridTensor features;
  FeatureField field;
  DragInstruction instruction;
  SlicOptions slic;
};

/// Uniform reals from std::mt19937_64 without going through std distributions, whose
/// output differs between standard libraries.
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// 64x64x4 zero latent with an analytic bump at (20, 24) to be dragged 8 px right. The
/// segmentation features mark an object disk around the drag path.
Scene bump_scene();

struct TwoMaterialOptions {
  std::uint64_t seed = 0;
  double texture_amplitude = 0.5;
  double texture_ceiling = 0.3;  // upper bound of texture channel 0
  int texture_row = 26;          // texture covers rows >= texture_row
};

/// 64x64x5 latent. An analytic bump sits on a smooth object strip directly above a band
/// of high-frequency texture held in latent channels 2..4 and shown through by the field.
/// The drag runs along the material boundary and must arrive exactly (stop radius 0.5).
Scene two_material_scene(const TwoMaterialOptions& options = {});

/// Constant single-channel features whose SLIC partition with 16 patches is the regular
/// 4 x 4 grid of 16 x 16 cells.
Scene grid16_scene();

}  // namespace dragforge
