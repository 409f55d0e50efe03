// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "doctest.h"
#include "dragforge/metrics.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace dragforge;

namespace {

GridTensor shifted_right(const GridTensor& z, int s) {
  GridTensor out(z.height(), z.width(), z.channels());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = s; x < z.width(); ++x) {
      for (int c = 0; c < z.channels(); ++c) out.at(y, x, c) = z.at(y, x - s, c);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("mean distance examples") {
    CHECK(mean_distance({{0, 0}}, {{3, 4}}) == 5.0);
    CHECK(mean_distance({{0, 0}, {1, 1}}, {{3, 4}, {1, 2}}) == 3.0);
    CHECK(mean_distance({{2.5, 7}}, {{2.5, 7}}) == 0.0);
    CHECK_THROWS_AS(mean_distance({}, {}), ParameterError);
    CHECK_THROWS_AS(mean_distance({{0, 0}}, {}), ParameterError);
  }

  TEST_CASE("mean distance is invariant to shared translation and pair order") {
    SceneRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<Point> f, t;
      for (int i = 0; i < 5; ++i) {
        f.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
        t.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
      }
      const double md = mean_distance(f, t);
      const double ox = rng.uniform(-10, 10), oy = rng.uniform(-10, 10);
      auto fs = f, ts = t;
      for (auto& p : fs) p = {p.x + ox, p.y + oy};
      for (auto& p : ts) p = {p.x + ox, p.y + oy};
      CHECK(mean_distance(fs, ts) == doctest::Approx(md));
      std::reverse(f.begin(), f.end());
      std::reverse(t.begin(), t.end());
      CHECK(mean_distance(f, t) == doctest::Approx(md));
    }
  }

  TEST_CASE("evaluation re-localises moved features") {
    const auto z = oracle::random_grid<float>(20, 20, 3, 5);
    const GridTensor moved = shifted_right(z, 3);
    DragInstruction instr;
    instr.pairs = {{{6, 6}, {9, 6}}, {{10, 12}, {15, 12}}};
    DragState st;
    st.points = {{9, 6}, {13, 12}};
    st.total_updates = 12;
    st.converged = true;
    const auto r = evaluate_session(st, instr, FeatureField::identity(), moved, z);
    REQUIRE(r.final_points.size() == 2);
    CHECK(r.final_points[0] == Point{9, 6});
    CHECK(r.final_points[1] == Point{13, 12});
    CHECK(r.distances[1] == 2.0);
    CHECK(r.md == 1.0);
    CHECK(r.updates == 12);
    CHECK(r.converged);
    CHECK(r.tracked_points == st.points);
  }

  TEST_CASE("an unchanged latent with degenerate pairs scores zero") {
    const auto z = oracle::random_grid<float>(12, 12, 2, 6);
    DragInstruction instr;
    instr.pairs = {{{4, 4}, {4, 4}}, {{7, 2}, {7, 2}}};
    DragState st;
    st.points = {{4, 4}, {7, 2}};
    const auto r = evaluate_session(st, instr, FeatureField::identity(), z, z);
    CHECK(r.md == 0.0);
  }

  TEST_CASE("outside-mask change") {
    const auto z = oracle::random_grid<float>(6, 6, 2, 7);
    GridTensor z1 = z;
    for (auto& v : z1.values()) v += 1.0f;
    DragInstruction instr;
    instr.pairs = {{{1, 1}, {1, 1}}};
    DragState st;
    st.points = {{1, 1}};
    const Mask full(6, 6, true), empty(6, 6, false);
    CHECK(evaluate_session(st, instr, FeatureField::identity(), z1, z, &full).outside_mask_l1 == 0.0);
    CHECK(evaluate_session(st, instr, FeatureField::identity(), z1, z, &empty).outside_mask_l1 ==
          doctest::Approx(1.0));
    CHECK(evaluate_session(st, instr, FeatureField::identity(), z1, z).outside_mask_l1 == 0.0);
    const Mask small(3, 3);
    CHECK_THROWS_AS(evaluate_session(st, instr, FeatureField::identity(), z1, z, &small),
                    ShapeError);
  }

  TEST_CASE("report serialisation") {
    EvalReport r;
    r.md = 1.5;
    r.updates = 7;
    r.distances = {1.0, 2.0};
    r.final_points = {{1, 2}, {3, 4}};
    r.targets = {{1, 3}, {3, 6}};
    const auto j = nlohmann::json::parse(report_to_json(r));
    CHECK(j.at("md").get<double>() == 1.5);
    CHECK(j.at("updates").get<int>() == 7);
    CHECK(j.at("final_points")[1][1].get<double>() == 4.0);
    CHECK(report_csv_header() == "md,converged,updates,n_pairs,outside_mask_l1\n");
    CHECK(report_csv_row(r) == "1.5,0,7,2,0\n");
  }
}
