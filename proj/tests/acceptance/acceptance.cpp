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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.
// Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rsulabel/config.hpp"
#include "rsulabel/evaluation.hpp"
#include "rsulabel/io.hpp"
#include "rsulabel/pipeline.hpp"
#include "rsulabel/refinement.hpp"
#include "suites.hpp"

using namespace rsulabel;
namespace fs = std::filesystem;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char * f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

PipelineConfig fixture_config(const std::string & name)
{
  return load_config(fs::path(RSULABEL_SOURCE_DIR) / "fixtures" / (name + ".cfg"));
}

Sequence simulated(const PipelineConfig & cfg)
{
  const SimConfig sc = resolve_sim(*cfg.sim, cfg.seed);
  return sequence_from_simulation(sc, simulate(sc, cfg.threads), cfg.sequence_id);
}

Outcome intersection_history()
{
  const auto t0 = Clock::now();
  PipelineConfig cfg = fixture_config("intersection");
  int strictly = 0;
  bool never_worse = true;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const Sequence seq = simulated(cfg);
    double recall[2];
    for (std::size_t k : {0, 2}) {
      PipelineConfig c = cfg;
      c.discovery.history_frames = k;
      recall[k / 2] = run_eval(run_discover(seq, c), *seq.ground_truth, c).recall;
    }
    never_worse = never_worse && recall[1] >= recall[0];
    strictly += recall[1] > recall[0];
    rows += fmt(" s%llu:%.3f/%.3f", static_cast<unsigned long long>(seed), recall[0], recall[1]);
  }
  const double t = seconds_since(t0);
  return {never_worse && strictly >= 4 && t < 60.0,
          fmt("recall k=0/k=2%s; strictly better on %d/5; %.1f s (limit 60)", rows.c_str(), strictly, t)};
}

Outcome sparse_bus()
{
  const auto t0 = Clock::now();
  PipelineConfig cfg = fixture_config("sparse_bus");
  const Sequence seq = simulated(cfg);
  std::size_t single_correct = 0;
  std::size_t multi_ok = 0;
  double worst_l = 0.0;
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const FrameBundle bundle = make_bundle(seq, i, 0);
    const BoundingBox & gt = seq.ground_truth->frames[i].labels.front().box;
    const std::vector<BoundingBox> gts{gt};

    DiscoveryConfig dc = cfg.discovery;
    dc.scales = {1.0};
    single_correct += match_frame(discover(bundle, dc), gts, cfg.eval_iou).pairs.size();

    dc.scales = {1.0, 0.5};
    const auto boxes = discover(bundle, dc);
    if (boxes.size() == 1) {
      const double err = std::abs(boxes[0].l - gt.l) / gt.l;
      worst_l = std::max(worst_l, err);
      multi_ok += err <= 0.15;
    } else {
      worst_l = 1.0;
    }
  }
  const double t = seconds_since(t0);
  const std::size_t n = seq.frames.size();
  return {single_correct == 0 && multi_ok == n && t < 10.0,
          fmt("%zu frames; scales [1.0]: %zu correct boxes; [1.0, 0.5]: %zu/%zu frames with one box, worst l error "
              "%.1f%%; %.1f s (limit 10)",
              n, single_correct, multi_ok, n, 100.0 * worst_l, t)};
}

Outcome adjacent_buses()
{
  const PipelineConfig cfg = fixture_config("adjacent_buses");
  const Sequence seq = simulated(cfg);
  const PipelineResult res = run_pipeline(seq, cfg);
  std::size_t discovered = 0;
  std::size_t refined = 0;
  for (const auto & f : res.discovered.frames) {
    discovered += f.labels.size();
  }
  for (const auto & f : res.refined.frames) {
    refined += f.labels.size();
  }
  return {discovered == 0 && refined == 0,
          fmt("%zu frames; %zu discovered boxes, %zu refined boxes (expected 0)", seq.frames.size(), discovered,
              refined)};
}

Outcome partial_visibility()
{
  const auto t0 = Clock::now();
  PipelineConfig cfg = fixture_config("partial_visibility");
  double before[3] = {0, 0, 0};
  double after[3] = {0, 0, 0};
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const Sequence seq = simulated(cfg);
    const PipelineResult res = run_pipeline(seq, cfg);
    const EvalReport pre = run_eval(res.tracked, *seq.ground_truth, cfg);
    const EvalReport post = run_eval(res.refined, *seq.ground_truth, cfg);
    before[0] += pre.ate / seeds;
    before[1] += pre.ase / seeds;
    before[2] += pre.aoe / seeds;
    after[0] += post.ate / seeds;
    after[1] += post.ase / seeds;
    after[2] += post.aoe / seeds;
  }
  const double t = seconds_since(t0);
  const bool ok = after[0] <= before[0] && after[1] <= before[1] && after[2] <= before[2] &&
                  after[2] <= 0.5 * before[2] && t < 120.0;
  return {ok, fmt("ATE %.4f -> %.4f, ASE %.4f -> %.4f, AOE %.4f -> %.4f (%.0f%% less); %.1f s (limit 120)", before[0],
                  after[0], before[1], after[1], before[2], after[2],
                  before[2] > 0 ? 100.0 * (1.0 - after[2] / before[2]) : 0.0, t)};
}

Outcome pose_recovery()
{
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> pos(-40.0, 40.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);

  auto body_points = [&](std::size_t n) {
    PointSet body(n);
    for (auto & p : body) {
      p = Vec3(2.3 * u(rng), 0.9 * u(rng), 0.8 + 0.75 * u(rng));
    }
    return body;
  };
  auto errors = [](const PoseEstimate & p, double theta, const Vec3 & c) {
    return std::pair{(Vec3(p.cx, p.cy, p.cz) - c).norm(), std::abs(normalize_angle(p.theta - theta))};
  };

  double worst_clean = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double theta = yaw(rng);
    const Vec3 c(pos(rng), pos(rng), u(rng));
    const PointSet body = body_points(100);
    const auto [dt, da] = errors(refine_pose(apply_transform(RigidTransform::from_yaw(theta, c), body), body), theta, c);
    worst_clean = std::max({worst_clean, dt, da});
  }

  int good = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    const double theta = yaw(rng);
    const Vec3 c(pos(rng), pos(rng), u(rng));
    const RigidTransform truth = RigidTransform::from_yaw(theta, c);
    const PointSet body = body_points(500);
    PointSet world = apply_transform(truth, body);
    for (auto & p : world) {
      p += Vec3(noise(rng), noise(rng), noise(rng));
    }
    const auto [dt, da] = errors(refine_pose(world, body), theta, c);
    good += dt < 0.02 && da < 0.5 * std::numbers::pi / 180.0;
  }
  return {worst_clean < 1e-9 && good >= 190,
          fmt("noiseless worst error %.2e (limit 1e-9); sigma 0.05, 500 points: %d/%d trials within 0.02 m / 0.5 deg "
              "(need 190)",
              worst_clean, good, trials)};
}

Outcome oracle_suites()
{
  const suites::Tally d = suites::dbscan_suite(50);
  const suites::Tally h = suites::hungarian_suite(100);
  const suites::Tally m = suites::match_suite(50);
  const suites::Tally i = suites::icp_suite(100);
  return {d.all() && h.all() && m.all() && i.all(),
          fmt("dbscan %d/%d, hungarian %d/%d, match_frame %d/%d, icp %d/%d", d.passed, d.total, h.passed, h.total,
              m.passed, m.total, i.passed, i.total)};
}

Outcome determinism()
{
  const fs::path root = fs::temp_directory_path() / "rsulabel_acceptance";
  const char * files[] = {"discovered.labels", "tracked.labels", "refined.labels", "report.json"};
  std::string rows;
  bool ok = true;
  for (const char * name : {"crossing_pair", "intersection"}) {
    PipelineConfig cfg = fixture_config(name);
    if (cfg.sim->preset == "intersection") {
      cfg.sim->frames = 10;
    }
    std::vector<std::vector<std::string>> runs;
    for (int threads : {1, 1, 8}) {
      cfg.threads = threads;
      const fs::path dir = root / name / std::to_string(runs.size());
      fs::remove_all(dir);
      run_pipeline(simulated(cfg), cfg, dir);
      std::vector<std::string> bytes;
      for (const char * f : files) {
        bytes.push_back(read_file(dir / f));
      }
      runs.push_back(std::move(bytes));
    }
    const bool same = runs[0] == runs[1] && runs[0] == runs[2];
    ok = ok && same;
    rows += fmt("%s%s %s (%zu bytes of refined labels)", rows.empty() ? "" : "; ", name,
                same ? "identical" : "DIFFERENT", runs[0][2].size());
  }
  return {ok, rows + " across runs and threads 1/8"};
}

Outcome end_to_end()
{
  std::string rows;
  bool ok = true;
  for (const char * name : {"static_car", "crossing_pair"}) {
    const PipelineConfig cfg = fixture_config(name);
    const PipelineResult res = run_pipeline(simulated(cfg), cfg);
    const EvalReport & r = *res.report;
    ok = ok && r.recall == 1.0 && r.precision == 1.0;
    rows += fmt("%s%s R=%.3f P=%.3f (tp %zu fp %zu fn %zu)", rows.empty() ? "" : "; ", name, r.recall, r.precision,
                r.tp, r.fp, r.fn);
  }
  return {ok, rows};
}

}  // namespace

int main(int argc, char ** argv)
{
  struct Criterion
  {
    const char * name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
    {"intersection recall with history frames", intersection_history},
    {"sparse bus multi-scale", sparse_bus},
    {"adjacent buses stay undetected", adjacent_buses},
    {"partial visibility refinement", partial_visibility},
    {"closed-form pose recovery", pose_recovery},
    {"oracle suites", oracle_suites},
    {"determinism", determinism},
    {"end to end", end_to_end},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    only.insert(std::atoi(argv[i]));
  }

  const auto t0 = Clock::now();
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) {
      continue;
    }
    const auto t = Clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  C%d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].name, o.detail.c_str(),
                seconds_since(t));
    std::fflush(stdout);
  }
  const double total = seconds_since(t0);
  if (only.empty()) {
    const bool fast = total < 600.0;
    failed += !fast;
    std::printf("%s  suite runtime %.1f s (limit 600)\n", fast ? "PASS" : "FAIL", total);
  }
  std::printf("%d failed\n", failed);
  return failed == 0 ? 0 : 1;
}
