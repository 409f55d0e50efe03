// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dragforge/grid.hpp"
#include "dragforge/mask.hpp"

namespace dragforge {

/// Cumulative noise levels alpha_0 .. alpha_T with alpha_0 = 1.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> alpha;

  /// Throws ParameterError unless 1 = alpha_0 >= alpha_1 >= ... >= alpha_T > 0.
  void validate() const;

  /// Scaled-linear betas (sqrt-spaced from beta_start to beta_end over train_steps),
  /// strided to `steps` DDIM steps with offset 1 and alpha_0 set to one.
  static NoiseSchedule scaled_linear(int steps = 50, int train_steps = 1000,
                                     double beta_start = 0.00085, double beta_end = 0.012);

  std::string to_json() const;
  static NoiseSchedule from_json(std::string_view text);
};

enum class PredictorKind { zero, constant, linear, tabulated };

std::string_view to_string(PredictorKind kind);
PredictorKind parse_predictor_kind(std::string_view name);

/// Toy stand-ins for the noise network eps(z_t, t).
///   zero:      0
///   constant:  c everywhere
///   linear:    slope * z + intercept
///   tabulated: gains[t] * z
struct NoisePredictor {
  PredictorKind kind = PredictorKind::zero;
  double constant = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> gains;

  void validate() const;

  template <class T>
  BasicGrid<T> predict(const BasicGrid<T>& z, int t) const;
};

/// |eps - pred(sqrt(a_t) z0 + sqrt(1 - a_t) eps, t)|^2.
template <class T>
double ddpm_loss(const NoisePredictor& pred, const BasicGrid<T>& z0, const BasicGrid<T>& eps,
                 int t, const NoiseSchedule& sched);

/// One deterministic DDIM step z_t -> z_{t-1}, 1 <= t <= T.
template <class T>
BasicGrid<T> ddim_step(const BasicGrid<T>& z_t, int t, const NoisePredictor& pred,
                       const NoiseSchedule& sched);

/// One inversion step z_t -> z_{t+1}, 0 <= t <= T - 1, using pred(z_t, t).
template <class T>
BasicGrid<T> ddim_invert_step(const BasicGrid<T>& z_t, int t, const NoisePredictor& pred,
                              const NoiseSchedule& sched);

/// Runs inversion steps from z at step `from` up to step `to`.
template <class T>
BasicGrid<T> ddim_invert(const BasicGrid<T>& z, int from, int to, const NoisePredictor& pred,
                         const NoiseSchedule& sched);

/// Runs sampling steps from z at step `from` down to step `to`.
template <class T>
BasicGrid<T> ddim_sample(const BasicGrid<T>& z, int from, int to, const NoisePredictor& pred,
                         const NoiseSchedule& sched);

/// A patch as rows of per-pixel feature vectors.
struct FeaturePatch {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows x cols, row-major

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

struct PatchPair {
  FeaturePatch a;  // handle patch, fixed
  FeaturePatch b;  // target patch, differentiated
};

struct ClossResult {
  double loss = 0.0;
  std::vector<FeaturePatch> grad_b;  // one per pair
};

/// Symmetric cross-entropy over the cosine similarity matrix between the rows of a and
/// b, scaled by 1/temperature, with matching rows as positives. Summed over pairs.
ClossResult closs(const std::vector<PatchPair>& pairs, double temperature = 0.07);

/// Square (2r+1)^2 patch of a grid around the pixel nearest to p.
/// Throws BoundsError if any of it falls outside the grid.
template <class T>
FeaturePatch extract_patch(const BasicGrid<T>& grid, const Point& p, int radius);

/// Mean cosine similarity between matching rows.
double mean_row_cosine(const FeaturePatch& a, const FeaturePatch& b);

struct GuidanceOptions {
  double scale = 0.0;
  int radius = 3;
  double temperature = 0.07;
  int window_lo = 1;   // guidance applies for window_lo <= t <= window_hi
  int window_hi = 35;
};

/// DDIM sampling from z at step t_start down to 0. Within the guidance window the target
/// patches of the x0-prediction are pulled toward the handle patches of z0_ref by a
/// descent step on closs, applied to z_t before the DDIM step.
template <class T>
BasicGrid<T> guided_sample(const BasicGrid<T>& z_start, int t_start, const NoiseSchedule& sched,
                           const NoisePredictor& pred, const BasicGrid<T>& z0_ref,
                           const std::vector<DragPair>& pairs, const GuidanceOptions& guidance);

}  // namespace dragforge
