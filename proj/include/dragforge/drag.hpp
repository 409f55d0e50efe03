// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <stop_token>
#include <string_view>
#include <vector>

#include "dragforge/field.hpp"
#include "dragforge/grid.hpp"
#include "dragforge/mask.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

enum class RegionKind { semantic, fixed_square };

/// How a semantic region follows a moving point.
///   containing: the patch that contains the current point.
///   anchored:   the handle's original patch, translated with the point.
enum class SemanticPolicy { containing, anchored };

struct RegionMode {
  RegionKind kind = RegionKind::semantic;
  int square_radius = 3;
  SemanticPolicy policy = SemanticPolicy::containing;

  void validate() const;
};

/// point:  a rejected step keeps the latent update and only holds the tracked point.
/// latent: a rejected step also restores the latent from before the update.
enum class RollbackMode { point, latent };

/// reference: penalise |z - z_ref| outside the mask, z_ref being the starting latent.
/// literal:   |z - sg(z)| outside the mask, which is identically zero.
enum class PreservationMode { reference, literal };

struct DragOptions {
  double lambda = 0.1;
  RollbackMode rollback = RollbackMode::point;
  PreservationMode preservation = PreservationMode::reference;
};

enum class StepDecision { accept, reject_direction, reject_distance };

std::string_view to_string(RegionKind v);
std::string_view to_string(SemanticPolicy v);
std::string_view to_string(RollbackMode v);
std::string_view to_string(PreservationMode v);
std::string_view to_string(StepDecision v);
RegionKind parse_region_kind(std::string_view s);
SemanticPolicy parse_semantic_policy(std::string_view s);
RollbackMode parse_rollback_mode(std::string_view s);
PreservationMode parse_preservation_mode(std::string_view s);

template <class T>
struct MotionLoss {
  double loss = 0.0;
  BasicGrid<T> gradient;
  int skipped_terms = 0;  // q + d fell outside the grid
};

/// Motion supervision: sum_i sum_{q in region_i} |F(q + d_i) - sg(F(q))|_1 plus
/// lambda |(z - sg(z_ref)) * complement|_1, with d_i the unit vector from the current point
/// towards its target. `complement` is H x W x 1 (see mask_complement_weighting).
/// Degenerate pairs contribute nothing.
template <class T>
MotionLoss<T> motion_supervision_loss(const FeatureField& field, const BasicGrid<T>& z,
                                      const BasicGrid<T>& z_ref,
                                      const std::vector<DragPair>& points,
                                      const std::vector<std::vector<Pixel>>& regions,
                                      const GridTensor& complement, double lambda,
                                      PreservationMode preservation = PreservationMode::reference);

/// z - lr * gradient. Throws NumericError naming the first non-finite gradient entry.
template <class T>
BasicGrid<T> latent_step(const BasicGrid<T>& z, const BasicGrid<T>& gradient, double lr);

/// argmin over region of |features(q) - reference|_1, ties to the smallest (y, x).
Pixel point_track_features(const GridTensor& features, const std::vector<float>& reference,
                           const std::vector<Pixel>& region);

/// Re-localises the feature found at p0 on z_orig within region of the field on z_new.
Point point_track(const FeatureField& field, const GridTensor& z_new, const GridTensor& z_orig,
                  const Point& p0, const std::vector<Pixel>& region);

StepDecision accept_step(const Point& h_prev, const Point& h_new, const Point& p0,
                         const Point& target, double ideal_d);

/// Signed length of the projection of p - p0 on the unit axis p0 -> target.
double projected_progress(const Point& p, const Point& p0, const Point& target);

/// Pixels within Chebyshev radius r of the pixel nearest to p, clipped to the grid.
std::vector<Pixel> square_region(int height, int width, const Point& p, int r);

/// Supervision and tracking region for a point currently at h whose drag started at p0.
std::vector<Pixel> drag_region(const Segmentation& seg, const RegionMode& mode, const Point& h,
                               const Point& p0);

struct DragEvent {
  int k = 0;                 // 1-based update index
  int point = 0;             // pair index
  StepDecision decision = StepDecision::accept;
  double loss = 0.0;
  double distance = 0.0;     // tracked point to target after the decision
  Point proposed;            // point_track result
  Point position;            // tracked point after the decision
};

struct DragState {
  int k = 0;
  GridTensor latent;
  std::vector<Point> points;
  std::vector<int> accepted_steps;
  int total_updates = 0;
  std::vector<std::vector<Point>> trajectory;
  bool converged = false;
};

struct DragDiagnostics {
  std::vector<double> losses;  // one per update
  std::vector<DragEvent> events;
  int skipped_terms = 0;
  int rejected_direction = 0;
  int rejected_distance = 0;
  bool cancelled = false;
};

struct DragResult {
  GridTensor latent;
  DragState state;
  DragDiagnostics diagnostics;

  bool incomplete() const { return !state.converged; }
};

using DragEventSink = std::function<void(const DragEvent&)>;

/// The drag loop: motion supervision, a gradient step, then point tracking and the
/// backtracking test for every pair still outside its stop radius. Points that arrive
/// are frozen. Stops when every point has arrived, at n_max updates, or on a stop request.
DragResult drag_session_run(const FeatureField& field, const GridTensor& z_init,
                            const Segmentation& seg, const DragInstruction& instr,
                            const RegionMode& region_mode, const Mask& mask,
                            const DragOptions& options = {}, const DragEventSink& sink = {},
                            std::stop_token stop = {});

}  // namespace dragforge
