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


// Randomised equivalence suites shared by the unit tests and the acceptance binary. Each
// returns the number of instances that agree with the reference.

#ifndef RSULABEL_TESTS__SUITES_HPP_
#define RSULABEL_TESTS__SUITES_HPP_

#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rsulabel/clustering.hpp"
#include "rsulabel/evaluation.hpp"
#include "rsulabel/registration.hpp"

namespace rsulabel::suites
{

struct Tally
{
  int passed = 0;
  int total = 0;

  bool all() const { return total > 0 && passed == total; }
};

inline Tally dbscan_suite(int instances, std::uint64_t seed = 1)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> centre(-8.0, 8.0);
  std::normal_distribution<double> g(0.0, 0.4);
  std::uniform_real_distribution<double> eps_d(0.3, 1.2);
  std::uniform_int_distribution<int> mp(2, 8);
  std::uniform_int_distribution<int> nblob(1, 5);
  Tally t;
  for (int k = 0; k < instances; ++k) {
    PointSet pts;
    const int blobs = nblob(rng);
    for (int b = 0; b < blobs; ++b) {
      const Vec3 c(centre(rng), centre(rng), 0.2 * centre(rng));
      for (int i = 0; i < 40; ++i) {
        pts.push_back(c + Vec3(g(rng), g(rng), g(rng)));
      }
    }
    for (int i = 0; i < 30; ++i) {
      pts.emplace_back(centre(rng), centre(rng), centre(rng));
    }
    const double eps = eps_d(rng);
    const auto min_pts = static_cast<std::size_t>(mp(rng));
    t.passed += oracle::dbscan_matches(dbscan(pts, eps, min_pts), oracle::dbscan_reference(pts, eps, min_pts));
    ++t.total;
  }
  return t;
}

inline Tally hungarian_suite(int matrices, std::uint64_t seed = 2)
{
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> val(0.0, 10.0);
  std::uniform_int_distribution<int> coarse(0, 3);
  Tally t;
  for (int k = 0; k < matrices; ++k) {
    const int rows = dim(rng);
    const int cols = dim(rng);
    // Every third matrix uses a few integer levels to exercise ties.
    const bool ties = k % 3 == 0;
    CostMatrix m(rows, cols);
    std::vector<std::vector<double>> ref(rows, std::vector<double>(cols));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        m(i, j) = ties ? static_cast<double>(coarse(rng)) : val(rng);
        ref[i][j] = m(i, j);
      }
    }
    const Assignment a = hungarian(m);
    double total = 0.0;
    std::vector<char> used(cols, 0);
    bool ok = a.matched() == static_cast<std::size_t>(std::min(rows, cols));
    for (int i = 0; i < rows; ++i) {
      const int j = a.row_to_col[i];
      if (j == Assignment::kUnassigned) {
        continue;
      }
      ok = ok && !used[j];
      used[j] = 1;
      total += m(i, j);
    }
    ok = ok && std::abs(total - oracle::assignment_minimum(ref)) < 1e-9 && std::abs(total - a.total_cost) < 1e-9;
    t.passed += ok;
    ++t.total;
  }
  return t;
}

inline Tally match_suite(int fixtures, std::uint64_t seed = 3)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  std::uniform_real_distribution<double> jitter(-1.2, 1.2);
  std::uniform_real_distribution<double> dim(1.5, 5.0);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  std::uniform_int_distribution<int> count(0, 6);
  Tally t;
  for (int k = 0; k < fixtures; ++k) {
    std::vector<BoundingBox> gts(static_cast<std::size_t>(count(rng)));
    for (auto & b : gts) {
      b.cx = pos(rng);
      b.cy = pos(rng);
      b.l = dim(rng);
      b.w = 0.5 * dim(rng);
      b.theta = yaw(rng);
    }
    std::vector<BoundingBox> dets;
    for (const auto & g : gts) {
      BoundingBox d = g;
      d.cx += jitter(rng);
      d.cy += jitter(rng);
      d.theta += 0.3 * jitter(rng);
      dets.push_back(d);
    }
    const int extra = count(rng) / 2;
    for (int i = 0; i < extra; ++i) {
      BoundingBox d;
      d.cx = pos(rng);
      d.cy = pos(rng);
      d.l = dim(rng);
      d.w = 0.5 * dim(rng);
      d.theta = yaw(rng);
      dets.push_back(d);
    }
    std::shuffle(dets.begin(), dets.end(), rng);
    const double thresh = 0.3;
    const FrameMatch m = match_frame(dets, gts, thresh);
    const auto ref = oracle::exhaustive_match(dets, gts, thresh);
    double sum = 0.0;
    bool ok = m.pairs.size() == ref.pairs;
    for (std::size_t p = 0; p < m.pairs.size(); ++p) {
      const double iou = bev_iou(dets[m.pairs[p].first], gts[m.pairs[p].second]);
      ok = ok && iou >= thresh;
      sum += iou;
    }
    ok = ok && std::abs(sum - ref.iou_sum) < 1e-9;
    ok = ok && m.pairs.size() + m.unmatched_detections.size() == dets.size();
    ok = ok && m.pairs.size() + m.unmatched_ground_truth.size() == gts.size();
    t.passed += ok;
    ++t.total;
  }
  return t;
}

/// Asymmetric solid: random points in an irregular union of boxes.
inline PointSet icp_cluster(std::mt19937_64 & rng, std::size_t n)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PointSet pts;
  while (pts.size() < n) {
    const Vec3 p(2.5 * u(rng), 1.2 * u(rng), 0.8 * u(rng));
    // Carve out a corner so no symmetry survives.
    if (p.x() > 1.0 && p.y() > 0.2) {
      continue;
    }
    pts.push_back(p);
  }
  return pts;
}

inline Tally icp_suite(int transforms, std::uint64_t seed = 4, double tol = 1e-3)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 15.0 * std::numbers::pi / 180.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  IcpParams params;
  params.corr_dist = 3.0;
  params.max_iter = 200;
  params.tol = 1e-10;
  Tally t;
  for (int k = 0; k < transforms; ++k) {
    const PointSet src = icp_cluster(rng, 300);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(angle(rng), oracle::random_unit(rng)).toRotationMatrix();
    Vec3 trans(u(rng), u(rng), u(rng));
    trans *= std::abs(u(rng)) / trans.norm();
    const RigidTransform truth = RigidTransform::from_rotation(r, trans);
    const PointSet tgt = apply_transform(truth, src);
    const IcpResult res = icp(src, tgt, RigidTransform{}, params);
    const double err = (res.transform.matrix() - truth.matrix()).cwiseAbs().maxCoeff();
    t.passed += err < tol && res.inlier_ratio > 0.999;
    ++t.total;
  }
  return t;
}

}  // namespace rsulabel::suites

#endif  // RSULABEL_TESTS__SUITES_HPP_
