// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stop_token>
#include <string>

#include "dragforge/config.hpp"
#include "dragforge/drag.hpp"
#include "dragforge/mask.hpp"
#include "dragforge/metrics.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

/// Artifact file name to contents.
using ArtifactSet = std::map<std::string, std::string>;

Segmentation run_segment(const GridTensor& features, const SlicOptions& slic);

/// The external mask when one is given, else the auto-generated one.
Mask run_mask(const Segmentation& seg, const DragInstruction& instr, int dilation,
              const std::optional<Mask>& external);

struct DragOutcome {
  GridTensor start_latent;  // latent at t_opt before optimization
  DragResult drag;
  GridTensor final_latent;  // sampled z_0, or the optimized latent without a sampler
  EvalReport report;
};

/// Inverts the input latent to t_opt, runs the drag there, evaluates it and samples the
/// result back to step 0. With the sampler disabled the input latent is optimized as is.
DragOutcome run_drag(const PipelineConfig& cfg, const Segmentation& seg, const Mask& mask,
                     const DragEventSink& sink = {}, std::stop_token stop = {});

/// One JSON-lines record of the drag diagnostics stream, newline included.
std::string encode_event_line(const DragEvent& event);

std::string encode_trajectory_json(const DragState& state, const DragInstruction& instr);

ArtifactSet segment_artifacts(const Segmentation& seg);   // labels.dft, labels.png
ArtifactSet mask_artifacts(const Mask& mask);             // mask.png
ArtifactSet drag_artifacts(const DragOutcome& outcome,    // trajectory.json, events.jsonl,
                           const DragInstruction& instr); // final.dft, report.json

struct PipelineResult {
  Segmentation segmentation;
  Mask mask;
  DragOutcome outcome;
  ArtifactSet artifacts;
};

/// segment -> mask -> drag -> sample -> evaluate.
PipelineResult run_pipeline(const PipelineConfig& cfg, const DragEventSink& sink = {});

void write_artifacts(const std::filesystem::path& dir, const ArtifactSet& artifacts);

}  // namespace dragforge
