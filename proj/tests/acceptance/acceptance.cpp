// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: runs every primary criterion at its stated tolerance and prints one
// PASS or FAIL line per criterion. Exits nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dragforge/config.hpp"
#include "dragforge/drag.hpp"
#include "dragforge/field.hpp"
#include "dragforge/mask.hpp"
#include "dragforge/metrics.hpp"
#include "dragforge/pipeline.hpp"
#include "dragforge/sampler.hpp"
#include "dragforge/scenes.hpp"
#include "dragforge/service.hpp"
#include "dragforge/superpixel.hpp"
#include "dragforge/tensor_io.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"

namespace {

using namespace dragforge;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const fs::path kScenarios = fs::path(DRAGFORGE_SOURCE_DIR) / "scenarios";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------------------

Outcome gradient_correctness() {
  struct Case {
    const char* name;
    FeatureField field;
    int h, w, c;
    double amp, step;
  };
  TabulatedParams table = fixture::random_table(8, 8, 80);
  const std::vector<Case> cases = {
      {"identity", FeatureField::identity(), 5, 4, 2, 1.0, 1e-3},
      {"linear-conv", FeatureField(fixture::random_conv(2, 3, 3, 60)), 6, 7, 2, 1.0, 1e-3},
      {"analytic-bump", FeatureField(fixture::random_bump(16, 16, 70)), 16, 16, 4, 0.05, 1e-3},
      // The warp is piecewise bilinear; a small step keeps probes off its kinks.
      {"tabulated", FeatureField(table), 8, 8, 2, 1.0, 1e-6},
  };
  double worst = 0.0;
  std::ostringstream os;
  for (const Case& k : cases) {
    double case_worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const std::uint64_t seed = 1000 + 31 * trial;
      const auto z = oracle::random_grid<double>(k.h, k.w, k.c, seed, -k.amp, k.amp);
      const auto f = field_forward(k.field, z);
      const auto cot =
          oracle::random_grid<double>(f.height(), f.width(), f.channels(), seed + 7);
      const auto analytic = field_adjoint(k.field, z, cot);
      const auto numeric = oracle::fd_gradient(
          [&](const GridTensorD& zz) { return oracle::inner(field_forward(k.field, zz), cot); },
          z, k.step);
      case_worst = std::max(case_worst,
                            oracle::relative_error(oracle::to_vector(analytic), numeric));
    }
    os << k.name << " " << fmt("%.2e", case_worst) << ", ";
    worst = std::max(worst, case_worst);
  }

  double closs_worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto patch = [&](std::uint64_t seed) {
      const auto g = oracle::random_grid<double>(1, 9 * 4, 1, seed);
      return FeaturePatch{9, 4, std::vector<double>(g.values().begin(), g.values().end())};
    };
    const FeaturePatch a = patch(2000 + trial), b = patch(3000 + trial);
    const ClossResult r = closs({{a, b}}, 0.1);
    std::vector<double> numeric(b.data.size());
    for (std::size_t i = 0; i < b.data.size(); ++i) {
      FeaturePatch bp = b, bm = b;
      bp.data[i] += 1e-6;
      bm.data[i] -= 1e-6;
      numeric[i] = (closs({{a, bp}}, 0.1).loss - closs({{a, bm}}, 0.1).loss) / 2e-6;
    }
    closs_worst = std::max(closs_worst, oracle::relative_error(r.grad_b[0].data, numeric));
  }
  os << "closs " << fmt("%.2e", closs_worst);
  worst = std::max(worst, closs_worst);
  return {worst < 1e-4, "max relative error over 10 instances per kind: " + os.str()};
}

// ---------------------------------------------------------------------------------------

Outcome ddim_round_trip() {
  const NoiseSchedule sched = NoiseSchedule::scaled_linear(50, 1000, 0.00085, 0.012);
  const GridTensor z = oracle::random_grid<float>(64, 64, 4, 11);
  NoisePredictor constant;
  constant.kind = PredictorKind::constant;
  constant.constant = 0.3;
  double worst = 0.0, slowest = 0.0;
  for (const NoisePredictor& pred : {NoisePredictor{}, constant}) {
    const auto t0 = Clock::now();
    const GridTensor back = ddim_sample(ddim_invert(z, 0, sched.T, pred, sched), sched.T, 0,
                                        pred, sched);
    slowest = std::max(slowest, seconds_since(t0));
    worst = std::max(worst, oracle::relative_error(oracle::to_vector(back), oracle::to_vector(z)));
  }
  return {worst < 1e-6 && slowest < 1.0,
          "64x64x4, 50 steps: max relative error " + fmt("%.2e", worst) + ", slowest " +
              fmt("%.3f", slowest) + " s"};
}

// ---------------------------------------------------------------------------------------

Outcome slic_invariants() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream os;

  // Coverage, connectivity and monotone objective on random and structured features.
  int runs = 0;
  for (int trial = 0; trial < 6; ++trial) {
    GridTensor f = oracle::random_grid<float>(64, 64, 3, 500 + trial, 0.0, 20.0);
    if (trial % 2 == 1) {
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) f.at(y, x, 0) += (x / 16 + y / 16) % 2 ? 40.0f : 0.0f;
      }
    }
    SlicTrace trace;
    const Segmentation seg = slic_segment(f, {64, 10.0, 10, true}, &trace);
    ++runs;
    bool covered = seg.labels.size() == 64u * 64u;
    for (int l : seg.labels) covered = covered && l >= 0 && l < seg.n_patches;
    bool monotone = true;
    for (std::size_t i = 1; i < trace.objective.size(); ++i) {
      monotone = monotone && trace.objective[i] <= trace.objective[i - 1];
    }
    const bool connected = oracle::labels_are_connected(seg);
    if (!covered || !monotone || !connected) {
      ok = false;
      os << "trial " << trial << (covered ? "" : " coverage") << (monotone ? "" : " objective")
         << (connected ? "" : " connectivity") << "; ";
    }
  }

  // Constant features recover the regular grid partition.
  int worst_dev = 0;
  for (int n : {16, 64}) {
    const Segmentation seg = slic_segment(GridTensor(64, 64, 1, 1.0f), {n, 10.0, 10, true});
    const auto [nx, ny] = slic_grid_layout(n, 64, 64);
    std::vector<int> cell_of_label(seg.n_patches, -1);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const int l = seg.label(y, x);
        if (cell_of_label[l] < 0) cell_of_label[l] = (y * ny / 64) * nx + x * nx / 64;
      }
    }
    // Deviation: distance from a pixel to the nearest pixel of the ideal cell its label
    // stands for, in Chebyshev metric.
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const int cell = cell_of_label[seg.label(y, x)];
        const int cx = cell % nx, cy = cell / nx;
        const int x0 = cx * 64 / nx, x1 = (cx + 1) * 64 / nx - 1;
        const int y0 = cy * 64 / ny, y1 = (cy + 1) * 64 / ny - 1;
        const int dx = std::max({x0 - x, 0, x - x1}), dy = std::max({y0 - y, 0, y - y1});
        worst_dev = std::max(worst_dev, std::max(dx, dy));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  ok = ok && worst_dev <= 2 && elapsed < 5.0;
  os << runs << " random runs covered, connected, monotone; grid recovery deviation "
     << worst_dev << " px; " << fmt("%.2f", elapsed) << " s";
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------------------

Outcome mask_correctness() {
  const Segmentation seg =
      segmentation_from_grid(read_grid(kScenarios / "grid16" / "labels.dft"));
  // Label of each grid cell, read at the cell center.
  std::vector<int> label_of_cell(16);
  for (int c = 0; c < 16; ++c) label_of_cell[c] = label_at(seg, {c % 4 * 16.0 + 7.5, c / 4 * 16.0 + 7.5});
  bool partition = seg.n_patches == 16;
  for (int y = 0; y < 64 && partition; ++y) {
    for (int x = 0; x < 64; ++x) {
      partition = partition && seg.label(y, x) == label_of_cell[(y / 16) * 4 + x / 16];
    }
  }
  SceneRng rng(2024);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const Point a{rng.uniform(0, 63), rng.uniform(0, 63)};
    const Point b{rng.uniform(0, 63), rng.uniform(0, 63)};
    DragInstruction instr;
    instr.pairs = {{a, b}};
    std::vector<int> expect;
    for (int c : oracle::grid16_cells_on_segment(a, b)) expect.push_back(label_of_cell[c]);
    std::sort(expect.begin(), expect.end());
    const Mask m = generate_mask(seg, instr);
    bool same = m.source_labels == expect;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        same = same && m.at(y, x) == std::binary_search(expect.begin(), expect.end(),
                                                        seg.label(y, x));
      }
    }
    exact += same;
  }
  return {partition && exact == 20,
          std::string(partition ? "shipped labels form the 4x4 grid" : "shipped labels are NOT the 4x4 grid") +
              "; " + std::to_string(exact) + "/20 random pairs match the analytic cell set"};
}

// ---------------------------------------------------------------------------------------

Outcome point_tracking() {
  int match = 0, ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint64_t seed = 7000 + trial;
    SceneRng rng(seed);
    const int kind = trial % 4;
    const bool quantized = trial % 3 == 0;
    FeatureField field;
    int zc = 2;
    switch (kind) {
      case 0: field = FeatureField::identity(); break;
      case 1: field = FeatureField(fixture::random_conv(2, 3, 3, seed)); break;
      case 2:
        field = FeatureField(fixture::random_bump(16, 16, seed));
        zc = 4;
        break;
      default: field = FeatureField(fixture::random_table(16, 16, seed)); break;
    }
    GridTensor z_orig = oracle::random_grid<float>(16, 16, zc, seed + 1, -0.5, 0.5);
    GridTensor z_new = z_orig;
    for (auto& v : z_new.values()) v += static_cast<float>(rng.uniform(-0.2, 0.2));
    Point p0{rng.uniform(0, 15), rng.uniform(0, 15)};
    if (quantized) {
      // Coarse values and an integer point make exact ties common.
      for (auto& v : z_orig.values()) v = std::round(v * 2.0f) / 2.0f;
      for (auto& v : z_new.values()) v = std::round(v * 2.0f) / 2.0f;
      p0 = {std::round(p0.x), std::round(p0.y)};
    }
    std::vector<Pixel> region;
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        if (rng.uniform() < 0.4) region.push_back({x, y});
      }
    }
    if (region.empty()) region.push_back({3, 3});
    for (std::size_t i = region.size(); i > 1; --i) {
      std::swap(region[i - 1], region[static_cast<std::size_t>(rng.uniform() * i)]);
    }

    const Point got = point_track(field, z_new, z_orig, p0, region);

    const GridTensor f_orig = field_forward(field, z_orig);
    const GridTensor f_new = field_forward(field, z_new);
    std::vector<float> ref(f_orig.channels());
    for (int c = 0; c < f_orig.channels(); ++c) {
      ref[c] = static_cast<float>(oracle::tent_sample(f_orig, p0, c));
    }
    double best = std::numeric_limits<double>::infinity();
    Pixel arg{};
    int at_best = 0;
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        if (std::find(region.begin(), region.end(), Pixel{x, y}) == region.end()) continue;
        double d = 0.0;
        for (int c = 0; c < f_new.channels(); ++c) {
          d += std::abs(static_cast<double>(f_new.at(y, x, c)) - static_cast<double>(ref[c]));
        }
        if (d < best) {
          best = d;
          arg = {x, y};
          at_best = 1;
        } else if (d == best) {
          ++at_best;  // scan order already visits the smallest (y, x) first
        }
      }
    }
    ties += at_best > 1;
    match += got == Point{static_cast<double>(arg.x), static_cast<double>(arg.y)};
  }
  return {match == 100, std::to_string(match) + "/100 match the exhaustive argmin (" +
                            std::to_string(ties) + " instances with tied minima)"};
}

// ---------------------------------------------------------------------------------------

Outcome backtracking() {
  int sessions = 0, violations = 0, over_budget = 0, converged = 0, max_updates = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SceneRng rng(9100 + trial);
    Scene s = bump_scene();
    BumpParams bump = std::get<BumpParams>(s.field.params());
    bump.base_center = {rng.uniform(18, 46), rng.uniform(18, 46)};
    s.field = FeatureField(bump);
    const double angle = rng.uniform(0, 2 * M_PI), len = rng.uniform(5, 10);
    DragInstruction instr;
    instr.pairs = {{bump.base_center,
                    {bump.base_center.x + len * std::cos(angle),
                     bump.base_center.y + len * std::sin(angle)}}};
    instr.n_steps = 8 + trial % 3 * 4;
    instr.n_max = 300;
    instr.learning_rate = rng.uniform(0.005, 0.02);
    instr.stop_radius = 1.0;

    // Segment the bump's own response together with position so the patch follows it.
    const GridTensor f = field_forward(s.field, s.latent);
    GridTensor feats(64, 64, 1);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) feats.at(y, x) = 20.0f * f.at(y, x, 0);
    }
    const Segmentation seg = slic_segment(feats, {16, 10.0, 10, true});
    const Mask mask = generate_mask(seg, instr);
    RegionMode mode;
    if (trial % 2) {
      mode.kind = RegionKind::fixed_square;
      mode.square_radius = 3;
    }
    const DragResult r = drag_session_run(s.field, s.latent, seg, instr, mode, mask);
    ++sessions;
    converged += r.state.converged;
    max_updates = std::max(max_updates, r.state.total_updates);
    over_budget += r.state.total_updates > 300;
    const auto& path = r.state.trajectory[0];
    for (std::size_t j = 1; j < path.size(); ++j) {
      if (!(projected_progress(path[j], instr.pairs[0].handle, instr.pairs[0].target) >
            projected_progress(path[j - 1], instr.pairs[0].handle, instr.pairs[0].target))) {
        ++violations;
      }
    }
  }
  return {violations == 0 && over_budget == 0,
          std::to_string(sessions) + " sessions, " + std::to_string(violations) +
              " non-increasing accepted steps, max updates " + std::to_string(max_updates) +
              " (n_max 300), " + std::to_string(converged) + " converged"};
}

// ---------------------------------------------------------------------------------------

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const PipelineResult bump = run_pipeline(load_config(kScenarios / "analytic_bump" / "config.json"));
  const double bump_s = seconds_since(t0);
  const EvalReport& br = bump.outcome.report;
  const bool bump_ok = br.converged && br.md <= 2.0 && bump_s < 30.0;

  double sum_sem = 0.0, sum_sq = 0.0;
  int square_worse = 0;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TwoMaterialOptions opt;
    opt.seed = seed;
    const Scene scene = two_material_scene(opt);
    PipelineConfig cfg;
    cfg.latent = scene.latent;
    cfg.features = scene.features;
    cfg.field = scene.field;
    cfg.instruction = scene.instruction;
    cfg.slic = scene.slic;
    cfg.sampler.enabled = false;
    cfg.seed = seed;
    const double sem = run_pipeline(cfg).outcome.report.md;
    cfg.region.kind = RegionKind::fixed_square;
    const double sq = run_pipeline(cfg).outcome.report.md;
    sum_sem += sem;
    sum_sq += sq;
    square_worse += sq > sem;
    per_seed << fmt("%.2f", sem) << "/" << fmt("%.2f", sq) << " ";
  }
  const bool pair_ok = sum_sq > sum_sem;
  return {bump_ok && pair_ok,
          "bump MD " + fmt("%.2f", br.md) + " px after " + std::to_string(br.updates) +
              " updates, " + (br.converged ? "converged" : "incomplete") + ", " +
              fmt("%.2f", bump_s) + " s; two-material mean MD semantic " +
              fmt("%.2f", sum_sem / 10) + " vs fixed-square " + fmt("%.2f", sum_sq / 10) +
              " (square worse on " + std::to_string(square_worse) + "/10 seeds: " +
              per_seed.str() + ")"};
}

// ---------------------------------------------------------------------------------------

Outcome closs_guidance() {
  const NoiseSchedule sched = NoiseSchedule::scaled_linear(50, 1000, 0.00085, 0.012);
  NoisePredictor pred;
  pred.kind = PredictorKind::tabulated;
  pred.gains.resize(sched.T + 1);
  for (int t = 0; t <= sched.T; ++t) pred.gains[t] = std::sqrt(1.0 - sched.alpha[t]);
  const int t_start = 35;
  // Guidance steps scale with 1 / temperature; scales near 0.1 and above overshoot on this
  // toy problem.
  GuidanceOptions guided;
  guided.scale = 0.01;
  guided.radius = 1;
  guided.temperature = 0.07;
  guided.window_lo = 1;
  guided.window_hi = t_start;
  GuidanceOptions plain = guided;
  plain.scale = 0.0;

  int wins = 0;
  double gain = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    SceneRng rng(4200 + trial);
    const GridTensor z0 = oracle::random_grid<float>(8, 8, 4, 4300 + trial, 0.1, 1.0);
    Point h{std::floor(rng.uniform(1, 7)), std::floor(rng.uniform(1, 7))};
    Point t;
    do {
      t = {std::floor(rng.uniform(1, 7)), std::floor(rng.uniform(1, 7))};
    } while (t == h);
    const std::vector<DragPair> pairs = {{h, t}};
    const GridTensor zt = ddim_invert(z0, 0, t_start, pred, sched);
    const GridTensor a = guided_sample(zt, t_start, sched, pred, z0, pairs, guided);
    const GridTensor b = guided_sample(zt, t_start, sched, pred, z0, pairs, plain);
    const FeaturePatch hp = extract_patch(z0, h, guided.radius);
    const double ca = mean_row_cosine(hp, extract_patch(a, t, guided.radius));
    const double cb = mean_row_cosine(hp, extract_patch(b, t, guided.radius));
    wins += ca > cb;
    gain += ca - cb;
  }
  return {wins >= 16, std::to_string(wins) + "/20 trials raise the handle-target patch cosine " +
                          "(mean gain " + fmt("%.4f", gain / 20) + ")"};
}

// ---------------------------------------------------------------------------------------

Outcome cli_service_equivalence() {
  const fs::path work = fs::temp_directory_path() / "dragforge-acceptance-equivalence";
  fs::remove_all(work);
  Service service(ServiceOptions{work / "service"});
  const int port = service.bind("127.0.0.1", 0);
  if (port < 0) return {false, "cannot bind the service"};
  std::thread server([&] { service.serve(); });
  httplib::Client c("127.0.0.1", port);
  c.set_read_timeout(120, 0);

  std::ostringstream os;
  bool ok = true;
  int compared = 0;
  for (const char* name : {"analytic_bump", "two_material"}) {
    const fs::path dir = kScenarios / name;
    const fs::path out = work / name;
    const std::string cmd = std::string("\"") + DRAGFORGE_CLI + "\" --config \"" +
                            (dir / "config.json").string() + "\" --out-dir \"" + out.string() +
                            "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      ok = false;
      os << name << ": CLI failed; ";
      continue;
    }
    const auto created = c.Post("/sessions", read_file(dir / "config.json"), "application/json");
    if (!created || created->status != 201) {
      ok = false;
      os << name << ": session not created; ";
      continue;
    }
    const auto status_doc = nlohmann::json::parse(created->body);
    const std::string id = status_doc.at("id");
    for (const auto& f : status_doc.at("missing")) {
      const std::string file = f.get<std::string>();
      c.Post("/sessions/" + id + "/upload/" + file, read_file(dir / file),
             "application/octet-stream");
    }
    bool staged = true;
    for (const char* stage : {"segment", "mask", "drag"}) {
      const auto res = c.Post("/sessions/" + id + "/" + stage, "{}", "application/json");
      staged = staged && res && (res->status == 200 || res->status == 202);
    }
    std::string final_status;
    for (int i = 0; staged && i < 12000; ++i) {
      const auto res = c.Get("/sessions/" + id);
      final_status = nlohmann::json::parse(res->body).at("status");
      if (final_status != "running") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!staged || final_status != "done") {
      ok = false;
      os << name << ": HTTP session ended " << final_status << "; ";
      continue;
    }
    int same = 0, files = 0;
    for (const auto& entry : fs::directory_iterator(out)) {
      const std::string file = entry.path().filename().string();
      const auto res = c.Get("/sessions/" + id + "/artifacts/" + file);
      ++files;
      same += res && res->status == 200 && res->body == read_file(entry.path());
    }
    compared += files;
    ok = ok && same == files && files == 7;
    os << name << ": " << same << "/" << files << " artifacts byte-identical; ";
  }
  service.stop();
  server.join();
  fs::remove_all(work);
  return {ok && compared > 0, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient-correctness", gradient_correctness},
      {"ddim-round-trip", ddim_round_trip},
      {"slic-invariants", slic_invariants},
      {"mask-correctness", mask_correctness},
      {"point-tracking-oracle", point_tracking},
      {"backtracking-invariant", backtracking},
      {"end-to-end-drag", end_to_end},
      {"closs-guidance", closs_guidance},
      {"cli-service-equivalence", cli_service_equivalence},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
