// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dragforge/drag.hpp"
#include "dragforge/field.hpp"
#include "dragforge/mask.hpp"

namespace dragforge {

struct EvalReport {
  std::vector<Point> final_points;  // re-localised handle features
  std::vector<Point> targets;
  std::vector<double> distances;    // per pair, pixels
  double md = 0.0;                  // mean of distances
  bool converged = false;
  int updates = 0;
  std::vector<Point> tracked_points;  // where the drag loop left each point
  // Mean |z_final - z_orig| outside the mask. A latent-space preservation proxy only.
  double outside_mask_l1 = 0.0;
};

/// Mean Euclidean distance. Throws ParameterError on a length mismatch or empty input.
double mean_distance(const std::vector<Point>& final_points, const std::vector<Point>& targets);

/// Re-localises every handle feature of z_orig on z_final by point tracking over the
/// whole grid and measures the distance to its target.
EvalReport evaluate_session(const DragState& state, const DragInstruction& instr,
                            const FeatureField& field, const GridTensor& z_final,
                            const GridTensor& z_orig, const Mask* mask = nullptr);

std::string report_to_json(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

}  // namespace dragforge
