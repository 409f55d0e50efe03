// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/drag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dragforge {

namespace {

template <class E>
E parse_enum(std::string_view s, std::initializer_list<std::pair<std::string_view, E>> table,
             const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw ParameterError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void RegionMode::validate() const {
  if (kind == RegionKind::fixed_square && square_radius < 1) {
    throw ParameterError("square radius must be >= 1");
  }
}

std::string_view to_string(RegionKind v) {
  return v == RegionKind::semantic ? "semantic" : "fixed-square";
}
std::string_view to_string(SemanticPolicy v) {
  return v == SemanticPolicy::containing ? "containing" : "anchored";
}
std::string_view to_string(RollbackMode v) { return v == RollbackMode::point ? "point" : "latent"; }
std::string_view to_string(PreservationMode v) {
  return v == PreservationMode::reference ? "reference" : "literal";
}
std::string_view to_string(StepDecision v) {
  switch (v) {
    case StepDecision::accept: return "accept";
    case StepDecision::reject_direction: return "reject-direction";
    case StepDecision::reject_distance: return "reject-distance";
  }
  return "unknown";
}

RegionKind parse_region_kind(std::string_view s) {
  return parse_enum<RegionKind>(
      s, {{"semantic", RegionKind::semantic}, {"fixed-square", RegionKind::fixed_square}},
      "region mode");
}
SemanticPolicy parse_semantic_policy(std::string_view s) {
  return parse_enum<SemanticPolicy>(
      s, {{"containing", SemanticPolicy::containing}, {"anchored", SemanticPolicy::anchored}},
      "semantic policy");
}
RollbackMode parse_rollback_mode(std::string_view s) {
  return parse_enum<RollbackMode>(
      s, {{"point", RollbackMode::point}, {"latent", RollbackMode::latent}}, "rollback mode");
}
PreservationMode parse_preservation_mode(std::string_view s) {
  return parse_enum<PreservationMode>(
      s, {{"reference", PreservationMode::reference}, {"literal", PreservationMode::literal}},
      "preservation mode");
}

template <class T>
MotionLoss<T> motion_supervision_loss(const FeatureField& field, const BasicGrid<T>& z,
                                      const BasicGrid<T>& z_ref,
                                      const std::vector<DragPair>& points,
                                      const std::vector<std::vector<Pixel>>& regions,
                                      const GridTensor& complement, double lambda,
                                      PreservationMode preservation) {
  if (points.size() != regions.size()) {
    throw ParameterError("motion supervision needs one region per point");
  }
  if (!z.same_shape(z_ref)) throw ShapeError("z_ref shape differs from z");
  if (complement.height() != z.height() || complement.width() != z.width() ||
      complement.channels() != 1) {
    throw ShapeError("mask complement must be " + std::to_string(z.height()) + "x" +
                     std::to_string(z.width()) + "x1");
  }
  const BasicGrid<T> f = field_forward(field, z);
  BasicGrid<T> cot(f.height(), f.width(), f.channels());
  const int nc = f.channels();

  MotionLoss<T> out;
  std::vector<double> diff(nc);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const DragPair& p = points[i];
    const double len = p.length();
    if (len == 0.0) continue;
    if (regions[i].empty()) throw ParameterError("empty supervision region");
    const double dx = (p.target.x - p.handle.x) / len, dy = (p.target.y - p.handle.y) / len;
    for (const Pixel& q : regions[i]) {
      if (!f.contains(q)) throw BoundsError("region pixel outside the feature map");
      const Point s{q.x + dx, q.y + dy};
      if (!f.contains(s)) {
        ++out.skipped_terms;
        continue;
      }
      const BilinearStencil st = bilinear_stencil(f.height(), f.width(), s);
      for (int c = 0; c < nc; ++c) {
        const double v = st.w00 * f.at(st.y0, st.x0, c) + st.w01 * f.at(st.y0, st.x1, c) +
                         st.w10 * f.at(st.y1, st.x0, c) + st.w11 * f.at(st.y1, st.x1, c);
        const double d = v - f.at(q.y, q.x, c);
        out.loss += std::abs(d);
        const double g = sign(d);
        if (g == 0.0) continue;
        cot.at(st.y0, st.x0, c) += static_cast<T>(g * st.w00);
        cot.at(st.y0, st.x1, c) += static_cast<T>(g * st.w01);
        cot.at(st.y1, st.x0, c) += static_cast<T>(g * st.w10);
        cot.at(st.y1, st.x1, c) += static_cast<T>(g * st.w11);
      }
    }
  }
  out.gradient = field_adjoint(field, z, cot);

  if (preservation == PreservationMode::reference && lambda != 0.0) {
    const int zc = z.channels();
    auto zv = z.values();
    auto rv = z_ref.values();
    auto gv = out.gradient.values();
    auto wv = complement.values();
    double pen = 0.0;
    for (std::size_t i = 0; i < zv.size(); ++i) {
      const double w = wv[i / zc];
      if (w == 0.0) continue;
      const double d = static_cast<double>(zv[i]) - static_cast<double>(rv[i]);
      pen += std::abs(d) * w;
      gv[i] += static_cast<T>(lambda * w * sign(d));
    }
    out.loss += lambda * pen;
  }
  return out;
}

template <class T>
BasicGrid<T> latent_step(const BasicGrid<T>& z, const BasicGrid<T>& gradient, double lr) {
  if (!z.same_shape(gradient)) {
    throw ShapeError("gradient shape " + gradient.shape_string() + " differs from latent " +
                     z.shape_string());
  }
  if (!(lr > 0.0)) throw ParameterError("learning rate must be > 0");
  require_finite(gradient, "gradient");
  BasicGrid<T> out = z;
  auto ov = out.values();
  auto gv = gradient.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<T>(ov[i] - lr * gv[i]);
  require_finite(out, "updated latent");
  return out;
}

template MotionLoss<float> motion_supervision_loss(const FeatureField&, const GridTensor&,
                                                   const GridTensor&, const std::vector<DragPair>&,
                                                   const std::vector<std::vector<Pixel>>&,
                                                   const GridTensor&, double, PreservationMode);
template MotionLoss<double> motion_supervision_loss(const FeatureField&, const GridTensorD&,
                                                    const GridTensorD&,
                                                    const std::vector<DragPair>&,
                                                    const std::vector<std::vector<Pixel>>&,
                                                    const GridTensor&, double, PreservationMode);
template GridTensor latent_step(const GridTensor&, const GridTensor&, double);
template GridTensorD latent_step(const GridTensorD&, const GridTensorD&, double);

Pixel point_track_features(const GridTensor& features, const std::vector<float>& reference,
                           const std::vector<Pixel>& region) {
  if (region.empty()) throw ParameterError("point tracking region is empty");
  if (reference.size() != static_cast<std::size_t>(features.channels())) {
    throw ShapeError("reference feature length differs from feature channels");
  }
  Pixel best{};
  double best_d = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const Pixel& q : region) {
    if (!features.contains(q)) throw BoundsError("tracking region pixel outside the grid");
    const auto px = features.pixel(q.y, q.x);
    double d = 0.0;
    for (std::size_t c = 0; c < px.size(); ++c) {
      d += std::abs(static_cast<double>(px[c]) - static_cast<double>(reference[c]));
    }
    if (!found || d < best_d || (d == best_d && q < best)) {
      best = q;
      best_d = d;
      found = true;
    }
  }
  return best;
}

Point point_track(const FeatureField& field, const GridTensor& z_new, const GridTensor& z_orig,
                  const Point& p0, const std::vector<Pixel>& region) {
  const GridTensor f_orig = field_forward(field, z_orig);
  const GridTensor f_new = field_forward(field, z_new);
  return to_point(point_track_features(f_new, bilinear_sample(f_orig, p0), region));
}

double projected_progress(const Point& p, const Point& p0, const Point& target) {
  const double ax = target.x - p0.x, ay = target.y - p0.y;
  const double len = std::hypot(ax, ay);
  if (len == 0.0) return 0.0;
  return ((p.x - p0.x) * ax + (p.y - p0.y) * ay) / len;
}

StepDecision accept_step(const Point& h_prev, const Point& h_new, const Point& p0,
                         const Point& target, double ideal_d) {
  const double mx = h_new.x - h_prev.x, my = h_new.y - h_prev.y;
  const double ax = target.x - p0.x, ay = target.y - p0.y;
  const double move = std::hypot(mx, my), axis = std::hypot(ax, ay);
  if (move == 0.0 || axis == 0.0) return StepDecision::reject_direction;
  const double cosine = (mx * ax + my * ay) / (move * axis);
  if (cosine <= 0.0) return StepDecision::reject_direction;
  if (move * cosine < ideal_d) return StepDecision::reject_distance;
  return StepDecision::accept;
}

std::vector<Pixel> square_region(int height, int width, const Point& p, int r) {
  const Pixel c = nearest_pixel(p);
  std::vector<Pixel> out;
  for (int y = std::max(0, c.y - r); y <= std::min(height - 1, c.y + r); ++y) {
    for (int x = std::max(0, c.x - r); x <= std::min(width - 1, c.x + r); ++x) {
      out.push_back({x, y});
    }
  }
  return out;
}

std::vector<Pixel> drag_region(const Segmentation& seg, const RegionMode& mode, const Point& h,
                               const Point& p0) {
  if (mode.kind == RegionKind::fixed_square) {
    if (!(h.x >= 0.0 && h.y >= 0.0 && h.x <= seg.width - 1 && h.y <= seg.height - 1)) {
      throw BoundsError("tracked point " + describe(h) + " left the grid");
    }
    return square_region(seg.height, seg.width, h, mode.square_radius);
  }
  if (mode.policy == SemanticPolicy::containing) return region_of(seg, h);
  const Pixel from = nearest_pixel(p0), to = nearest_pixel(h);
  std::vector<Pixel> out;
  for (const Pixel& q : region_of(seg, p0)) {
    const Pixel m{q.x + to.x - from.x, q.y + to.y - from.y};
    if (m.x >= 0 && m.y >= 0 && m.x < seg.width && m.y < seg.height) out.push_back(m);
  }
  return out;
}

DragResult drag_session_run(const FeatureField& field, const GridTensor& z_init,
                            const Segmentation& seg, const DragInstruction& instr,
                            const RegionMode& region_mode, const Mask& mask,
                            const DragOptions& options, const DragEventSink& sink,
                            std::stop_token stop) {
  instr.validate();
  region_mode.validate();
  field.check_latent(z_init.height(), z_init.width(), z_init.channels());
  validate_segmentation(seg);
  if (seg.height != z_init.height() || seg.width != z_init.width()) {
    throw ShapeError("segmentation and latent sizes differ");
  }
  if (mask.height != z_init.height() || mask.width != z_init.width()) {
    throw ShapeError("mask and latent sizes differ");
  }
  instr.check_bounds(z_init.height(), z_init.width());
  require_finite(z_init, "initial latent");

  const std::size_t n = instr.pairs.size();
  const GridTensor complement = mask_complement_weighting(mask);
  const GridTensor f0 = field_forward(field, z_init);
  std::vector<std::vector<float>> ref(n);
  for (std::size_t i = 0; i < n; ++i) ref[i] = bilinear_sample(f0, instr.pairs[i].handle);

  DragResult r;
  DragState& st = r.state;
  st.points.resize(n);
  st.accepted_steps.assign(n, 0);
  st.trajectory.resize(n);
  std::vector<bool> active(n);
  std::vector<double> ideal(n);
  for (std::size_t i = 0; i < n; ++i) {
    const DragPair& p = instr.pairs[i];
    st.points[i] = p.handle;
    st.trajectory[i].push_back(p.handle);
    ideal[i] = p.length() / instr.n_steps;
    active[i] = !p.degenerate() && p.length() > instr.stop_radius;
  }

  GridTensor z = z_init;
  while (true) {
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
      st.converged = true;
      break;
    }
    if (st.total_updates >= instr.n_max) break;
    if (stop.stop_requested()) {
      r.diagnostics.cancelled = true;
      break;
    }

    std::vector<DragPair> pts;
    std::vector<std::vector<Pixel>> regions;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      idx.push_back(i);
      pts.push_back({st.points[i], instr.pairs[i].target});
      regions.push_back(drag_region(seg, region_mode, st.points[i], instr.pairs[i].handle));
    }
    const MotionLoss<float> ms = motion_supervision_loss(field, z, z_init, pts, regions,
                                                         complement, options.lambda,
                                                         options.preservation);
    GridTensor z_new = latent_step(z, ms.gradient, instr.learning_rate);
    ++st.total_updates;
    st.k = st.total_updates;
    r.diagnostics.losses.push_back(ms.loss);
    r.diagnostics.skipped_terms += ms.skipped_terms;

    const GridTensor f_new = field_forward(field, z_new);
    bool any_rejected = false;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const std::size_t i = idx[j];
      const DragPair& pair = instr.pairs[i];
      const Point q = to_point(point_track_features(f_new, ref[i], regions[j]));
      const StepDecision d = accept_step(st.points[i], q, pair.handle, pair.target, ideal[i]);
      if (d == StepDecision::accept) {
        st.points[i] = q;
        st.trajectory[i].push_back(q);
        ++st.accepted_steps[i];
        if (distance(q, pair.target) <= instr.stop_radius) active[i] = false;
      } else {
        any_rejected = true;
        ++(d == StepDecision::reject_direction ? r.diagnostics.rejected_direction
                                               : r.diagnostics.rejected_distance);
      }
      DragEvent ev;
      ev.k = st.total_updates;
      ev.point = static_cast<int>(i);
      ev.decision = d;
      ev.loss = ms.loss;
      ev.distance = distance(st.points[i], pair.target);
      ev.proposed = q;
      ev.position = st.points[i];
      r.diagnostics.events.push_back(ev);
      if (sink) sink(ev);
    }
    if (!(options.rollback == RollbackMode::latent && any_rejected)) z = std::move(z_new);
  }
  st.latent = z;
  r.latent = std::move(z);
  return r;
}

}  // namespace dragforge
