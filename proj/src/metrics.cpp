// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/metrics.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace dragforge {

double mean_distance(const std::vector<Point>& final_points, const std::vector<Point>& targets) {
  if (final_points.size() != targets.size()) {
    throw ParameterError("mean distance needs equally many points and targets (" +
                         std::to_string(final_points.size()) + " vs " +
                         std::to_string(targets.size()) + ")");
  }
  if (targets.empty()) throw ParameterError("mean distance of an empty point list");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) sum += distance(final_points[i], targets[i]);
  return sum / static_cast<double>(targets.size());
}

EvalReport evaluate_session(const DragState& state, const DragInstruction& instr,
                            const FeatureField& field, const GridTensor& z_final,
                            const GridTensor& z_orig, const Mask* mask) {
  if (!z_final.same_shape(z_orig)) throw ShapeError("final and original latents differ in shape");
  EvalReport r;
  r.converged = state.converged;
  r.updates = state.total_updates;
  r.tracked_points = state.points;

  const GridTensor f_orig = field_forward(field, z_orig);
  const GridTensor f_final = field_forward(field, z_final);
  std::vector<Pixel> full;
  full.reserve(static_cast<std::size_t>(z_final.height()) * z_final.width());
  for (int y = 0; y < z_final.height(); ++y) {
    for (int x = 0; x < z_final.width(); ++x) full.push_back({x, y});
  }
  for (const DragPair& p : instr.pairs) {
    const Pixel q = point_track_features(f_final, bilinear_sample(f_orig, p.handle), full);
    r.final_points.push_back(to_point(q));
    r.targets.push_back(p.target);
    r.distances.push_back(distance(to_point(q), p.target));
  }
  r.md = mean_distance(r.final_points, r.targets);

  if (mask) {
    if (mask->height != z_final.height() || mask->width != z_final.width()) {
      throw ShapeError("mask and latent sizes differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    const int c = z_final.channels();
    for (int y = 0; y < z_final.height(); ++y) {
      for (int x = 0; x < z_final.width(); ++x) {
        if (mask->at(y, x)) continue;
        for (int ch = 0; ch < c; ++ch) {
          sum += std::abs(static_cast<double>(z_final.at(y, x, ch)) - z_orig.at(y, x, ch));
        }
        count += c;
      }
    }
    r.outside_mask_l1 = count ? sum / static_cast<double>(count) : 0.0;
  }
  return r;
}

namespace {

nlohmann::ordered_json points_json(const std::vector<Point>& pts) {
  auto arr = nlohmann::ordered_json::array();
  for (const Point& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["md"] = r.md;
  j["converged"] = r.converged;
  j["updates"] = r.updates;
  j["distances"] = r.distances;
  j["final_points"] = points_json(r.final_points);
  j["targets"] = points_json(r.targets);
  j["tracked_points"] = points_json(r.tracked_points);
  j["outside_mask_l1"] = r.outside_mask_l1;
  j["outside_mask_l1_note"] = "latent-space L1 proxy, not comparable to image fidelity scores";
  return j.dump(2) + "\n";
}

std::string report_csv_header() { return "md,converged,updates,n_pairs,outside_mask_l1\n"; }

std::string report_csv_row(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.md << ',' << (r.converged ? 1 : 0) << ',' << r.updates << ',' << r.distances.size()
     << ',' << r.outside_mask_l1 << '\n';
  return os.str();
}

}  // namespace dragforge
