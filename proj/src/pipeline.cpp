// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/pipeline.hpp"

#include "config_json.hpp"
#include "dragforge/png.hpp"
#include "dragforge/sampler.hpp"
#include "dragforge/tensor_io.hpp"

namespace dragforge {

using detail::ordered_json;
using detail::point_json;

Segmentation run_segment(const GridTensor& features, const SlicOptions& slic) {
  return slic_segment(features, slic);
}

Mask run_mask(const Segmentation& seg, const DragInstruction& instr, int dilation,
              const std::optional<Mask>& external) {
  instr.check_bounds(seg.height, seg.width);
  if (external) {
    if (external->height != seg.height || external->width != seg.width) {
      throw ShapeError("external mask size differs from the segmentation");
    }
    return dilation > 0 ? dilate(*external, dilation) : *external;
  }
  return generate_mask(seg, instr, dilation);
}

DragOutcome run_drag(const PipelineConfig& cfg, const Segmentation& seg, const Mask& mask,
                     const DragEventSink& sink, std::stop_token stop) {
  const SamplerConfig& s = cfg.sampler;
  DragOutcome out;
  out.start_latent =
      s.enabled ? ddim_invert(cfg.latent, 0, s.t_opt, s.predictor, s.schedule) : cfg.latent;
  out.drag = drag_session_run(cfg.field, out.start_latent, seg, cfg.instruction, cfg.region, mask,
                              cfg.drag, sink, stop);
  out.report = evaluate_session(out.drag.state, cfg.instruction, cfg.field, out.drag.latent,
                                out.start_latent, &mask);
  out.final_latent = s.enabled ? guided_sample(out.drag.latent, s.t_opt, s.schedule, s.predictor,
                                               cfg.latent, cfg.instruction.pairs, s.guidance)
                               : out.drag.latent;
  return out;
}

std::string encode_event_line(const DragEvent& e) {
  ordered_json j;
  j["k"] = e.k;
  j["point"] = e.point;
  j["decision"] = std::string(to_string(e.decision));
  j["loss"] = e.loss;
  j["distance"] = e.distance;
  j["proposed"] = point_json(e.proposed);
  j["position"] = point_json(e.position);
  return j.dump() + "\n";
}

std::string encode_trajectory_json(const DragState& state, const DragInstruction& instr) {
  auto points = ordered_json::array();
  for (std::size_t i = 0; i < instr.pairs.size(); ++i) {
    ordered_json p;
    p["handle"] = point_json(instr.pairs[i].handle);
    p["target"] = point_json(instr.pairs[i].target);
    auto path = ordered_json::array();
    for (const Point& q : state.trajectory[i]) path.push_back(point_json(q));
    p["accepted"] = std::move(path);
    p["accepted_steps"] = state.accepted_steps[i];
    p["final"] = point_json(state.points[i]);
    points.push_back(std::move(p));
  }
  ordered_json j;
  j["converged"] = state.converged;
  j["total_updates"] = state.total_updates;
  j["points"] = std::move(points);
  return j.dump(2) + "\n";
}

ArtifactSet segment_artifacts(const Segmentation& seg) {
  return {{"labels.dft", encode_dft(labels_to_grid(seg))},
          {"labels.png", encode_labels_png(seg)}};
}

ArtifactSet mask_artifacts(const Mask& mask) { return {{"mask.png", encode_mask_png(mask)}}; }

ArtifactSet drag_artifacts(const DragOutcome& outcome, const DragInstruction& instr) {
  std::string events;
  for (const DragEvent& e : outcome.drag.diagnostics.events) events += encode_event_line(e);
  return {{"trajectory.json", encode_trajectory_json(outcome.drag.state, instr)},
          {"events.jsonl", std::move(events)},
          {"final.dft", encode_dft(outcome.final_latent)},
          {"report.json", report_to_json(outcome.report)}};
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const DragEventSink& sink) {
  PipelineResult r;
  r.segmentation = run_segment(cfg.features, cfg.slic);
  r.mask = run_mask(r.segmentation, cfg.instruction, cfg.mask_dilation, cfg.external_mask);
  r.outcome = run_drag(cfg, r.segmentation, r.mask, sink);
  r.artifacts.merge(segment_artifacts(r.segmentation));
  r.artifacts.merge(mask_artifacts(r.mask));
  r.artifacts.merge(drag_artifacts(r.outcome, cfg.instruction));
  return r;
}

void write_artifacts(const std::filesystem::path& dir, const ArtifactSet& artifacts) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [name, bytes] : artifacts) write_file(dir / name, bytes);
}

}  // namespace dragforge
