// Copyright 2026 The rsulabel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/evaluation.hpp"
#include "suites.hpp"

using namespace rsulabel;

namespace
{

BoundingBox box(double x, double y, double theta = 0.0, double l = 4.0, double w = 2.0)
{
  BoundingBox b;
  b.cx = x;
  b.cy = y;
  b.cz = 0.8;
  b.l = l;
  b.w = w;
  b.h = 1.6;
  b.theta = theta;
  return b;
}

std::vector<FrameBoxes> random_frames(std::mt19937_64 & rng, int frames)
{
  std::uniform_real_distribution<double> pos(-30.0, 30.0);
  std::uniform_real_distribution<double> yaw(-3.0, 3.0);
  std::uniform_int_distribution<int> n(0, 6);
  std::vector<FrameBoxes> out(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    out[f].timestep = f;
    const int k = n(rng);
    for (int i = 0; i < k; ++i) {
      out[f].boxes.push_back(box(pos(rng), pos(rng), yaw(rng)));
    }
  }
  return out;
}

std::vector<FrameBoxes> perturb(std::mt19937_64 & rng, const std::vector<FrameBoxes> & gts)
{
  std::normal_distribution<double> g(0.0, 0.4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FrameBoxes> out = gts;
  for (auto & f : out) {
    std::vector<BoundingBox> kept;
    for (BoundingBox b : f.boxes) {
      if (u(rng) < 0.15) {
        continue;
      }
      b.cx += g(rng);
      b.cy += g(rng);
      b.theta += 0.3 * g(rng);
      b.l *= 1.0 + 0.2 * g(rng);
      b.w *= 1.0 + 0.2 * g(rng);
      b.vx = g(rng);
      kept.push_back(b);
    }
    if (u(rng) < 0.3) {
      kept.push_back(box(100.0 * u(rng), -40.0, 0.0));
    }
    f.boxes = kept;
  }
  return out;
}

/// Straight-line reference: exhaustive per-frame matching, then the textbook formulas.
struct Reference
{
  std::size_t tp = 0, fp = 0, fn = 0;
  double ate = 0.0, ase = 0.0, aoe = 0.0;
};

Reference reference_report(const std::vector<FrameBoxes> & dets, const std::vector<FrameBoxes> & gts, double thr)
{
  Reference r;
  double ate = 0.0, ase = 0.0, aoe = 0.0;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    const auto & d = dets[f].boxes;
    const auto & g = gts[f].boxes;
    // Enumerate all matchings, keep the best (most pairs, then highest IoU sum).
    std::vector<int> assign(d.size(), -1), best_assign;
    std::size_t best_pairs = 0;
    double best_sum = -1.0;
    std::vector<char> used(g.size(), 0);
    std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t pairs, double sum) {
      if (i == d.size()) {
        if (pairs > best_pairs || (pairs == best_pairs && sum > best_sum)) {
          best_pairs = pairs;
          best_sum = sum;
          best_assign = assign;
        }
        return;
      }
      assign[i] = -1;
      rec(i + 1, pairs, sum);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double iou = bev_iou(d[i], g[j]);
        if (!used[j] && iou >= thr) {
          used[j] = 1;
          assign[i] = static_cast<int>(j);
          rec(i + 1, pairs + 1, sum + iou);
          used[j] = 0;
        }
      }
      assign[i] = -1;
    };
    rec(0, 0, 0.0);
    r.tp += best_pairs;
    r.fp += d.size() - best_pairs;
    r.fn += g.size() - best_pairs;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (best_assign[i] < 0) {
        continue;
      }
      const BoundingBox & a = d[i];
      const BoundingBox & b = g[static_cast<std::size_t>(best_assign[i])];
      ate += std::sqrt((a.cx - b.cx) * (a.cx - b.cx) + (a.cy - b.cy) * (a.cy - b.cy));
      const double inter = std::min(a.l, b.l) * std::min(a.w, b.w) * std::min(a.h, b.h);
      ase += 1.0 - inter / (a.l * a.w * a.h + b.l * b.w * b.h - inter);
      double dy = std::fmod(std::abs(a.theta - b.theta), std::numbers::pi);
      aoe += std::min(dy, std::numbers::pi - dy);
    }
  }
  if (r.tp) {
    r.ate = ate / static_cast<double>(r.tp);
    r.ase = ase / static_cast<double>(r.tp);
    r.aoe = aoe / static_cast<double>(r.tp);
  }
  return r;
}

}  // namespace

TEST_CASE("match_frame examples")
{
  const std::vector<BoundingBox> gts{box(0, 0), box(10, 0), box(0, 10)};
  const FrameMatch same = match_frame(gts, gts, 0.3);
  CHECK(same.pairs.size() == 3);
  CHECK(same.unmatched_detections.empty());

  const FrameMatch none = match_frame(std::vector<BoundingBox>{}, gts, 0.3);
  CHECK(none.pairs.empty());
  CHECK(none.unmatched_ground_truth.size() == 3);

  CHECK_THROWS_AS(match_frame(gts, gts, 0.0), ParameterError);
  CHECK_THROWS_AS(match_frame(gts, gts, 1.0), ParameterError);
}

TEST_CASE("match_frame prefers more pairs over one strong pair")
{
  // Detection 0 overlaps both truths; greedy on IoU would take (0,0) and strand detection 1.
  const std::vector<BoundingBox> gts{box(0, 0), box(2.4, 0)};
  const std::vector<BoundingBox> dets{box(0.6, 0), box(-0.6, 0)};
  const FrameMatch m = match_frame(dets, gts, 0.3);
  const auto ref = oracle::exhaustive_match(dets, gts, 0.3);
  CHECK(m.pairs.size() == ref.pairs);
}

TEST_CASE("match_frame agrees with exhaustive matching")
{
  const auto t = suites::match_suite(50);
  CHECK(t.passed == t.total);
}

TEST_CASE("compute_report")
{
  std::mt19937_64 rng(6);
  const auto gts = random_frames(rng, 20);
  SUBCASE("perfect detections")
  {
    const EvalReport r = compute_report(gts, gts, 0.3);
    CHECK(r.recall == 1.0);
    CHECK(r.precision == 1.0);
    CHECK(r.ate == 0.0);
    CHECK(r.ase == doctest::Approx(0.0));
    CHECK(r.aoe == 0.0);
  }
  SUBCASE("shifted detections")
  {
    auto dets = gts;
    for (auto & f : dets) {
      for (auto & b : f.boxes) {
        b.cx += 0.2;
      }
    }
    const EvalReport r = compute_report(dets, gts, 0.3);
    CHECK(r.ate == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.aoe == 0.0);
  }
  SUBCASE("heading flips cost nothing")
  {
    auto dets = gts;
    for (auto & f : dets) {
      for (auto & b : f.boxes) {
        b.theta += std::numbers::pi;
      }
    }
    CHECK(compute_report(dets, gts, 0.3).aoe == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("randomised fixtures match the straight-line reference")
  {
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = random_frames(rng, 20);
      const auto d = perturb(rng, g);
      const EvalReport r = compute_report(d, g, 0.3);
      const Reference ref = reference_report(d, g, 0.3);
      CHECK(r.tp == ref.tp);
      CHECK(r.fp == ref.fp);
      CHECK(r.fn == ref.fn);
      CHECK(r.ate == doctest::Approx(ref.ate).epsilon(1e-9));
      CHECK(r.ase == doctest::Approx(ref.ase).epsilon(1e-9));
      CHECK(r.aoe == doctest::Approx(ref.aoe).epsilon(1e-9));
      CHECK(r.recall == doctest::Approx(ref.tp ? double(ref.tp) / double(ref.tp + ref.fn) : 0.0));
    }
  }
  SUBCASE("monotone in false positives and misses")
  {
    const auto d = perturb(rng, gts);
    const EvalReport base = compute_report(d, gts, 0.3);
    auto more_fp = d;
    more_fp[0].boxes.push_back(box(500, 500));
    CHECK(compute_report(more_fp, gts, 0.3).precision <= base.precision);
    auto more_gt = gts;
    more_gt[0].boxes.push_back(box(-500, 500));
    CHECK(compute_report(d, more_gt, 0.3).recall <= base.recall);
  }
  SUBCASE("invariant under a global rigid motion")
  {
    const auto d = perturb(rng, gts);
    const RigidTransform t = RigidTransform::from_yaw(0.9, Vec3(12, -7, 0));
    auto move = [&](std::vector<FrameBoxes> frames) {
      for (auto & f : frames) {
        for (auto & b : f.boxes) {
          const Vec3 c = t * b.center();
          b.cx = c.x();
          b.cy = c.y();
          b.theta += 0.9;
        }
      }
      return frames;
    };
    const EvalReport a = compute_report(d, gts, 0.3);
    const EvalReport b = compute_report(move(d), move(gts), 0.3);
    CHECK(a.tp == b.tp);
    CHECK(a.ate == doctest::Approx(b.ate).epsilon(1e-9));
    CHECK(a.aoe == doctest::Approx(b.aoe).epsilon(1e-9));
  }
  SUBCASE("velocity error only on request")
  {
    CHECK_FALSE(compute_report(gts, gts, 0.3).ave.has_value());
    CHECK(compute_report(gts, gts, 0.3, true).ave.value() == 0.0);
  }
  SUBCASE("timestep mismatch")
  {
    auto d = gts;
    d[3].timestep = 99;
    CHECK_THROWS_AS(compute_report(d, gts, 0.3), ParameterError);
  }
}
