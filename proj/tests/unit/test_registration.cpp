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
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/registration.hpp"
#include "suites.hpp"

using namespace rsulabel;

TEST_CASE("hungarian examples")
{
  CostMatrix eye = CostMatrix::Ones(3, 3) - CostMatrix::Identity(3, 3);
  const Assignment a = hungarian(eye);
  CHECK(a.row_to_col == std::vector<int>{0, 1, 2});
  CHECK(a.total_cost == 0.0);

  CostMatrix one(1, 1);
  one << 4.2;
  CHECK(hungarian(one).row_to_col == std::vector<int>{0});

  CostMatrix wide(2, 3);
  wide << 5, 1, 9, 2, 8, 3;
  const Assignment w = hungarian(wide);
  CHECK(w.row_to_col == std::vector<int>{1, 0});
  CHECK(w.total_cost == doctest::Approx(3.0));

  CostMatrix tall(3, 1);
  tall << 4, 1, 7;
  const Assignment t = hungarian(tall);
  CHECK(t.row_to_col == std::vector<int>{Assignment::kUnassigned, 0, Assignment::kUnassigned});
}

TEST_CASE("hungarian drops pairs above the rejection threshold")
{
  CostMatrix m(2, 2);
  m << 0.1, 5.0, 5.0, 0.9;
  const Assignment a = hungarian(m, 0.5);
  CHECK(a.row_to_col == std::vector<int>{0, Assignment::kUnassigned});
  CHECK(a.matched() == 1);
}

TEST_CASE("hungarian agrees with permutation brute force")
{
  const auto t = suites::hungarian_suite(100);
  CHECK(t.passed == t.total);
}

TEST_CASE("icp examples")
{
  std::mt19937_64 rng(17);
  const PointSet blob = suites::icp_cluster(rng, 200);

  SUBCASE("identical clouds")
  {
    const IcpResult r = icp(blob, blob, RigidTransform{});
    CHECK((r.transform.matrix() - Eigen::Matrix4d::Identity()).norm() < 1e-9);
    CHECK(r.inlier_ratio == 1.0);
    CHECK(r.converged);
  }
  SUBCASE("pure translation")
  {
    const RigidTransform shift = RigidTransform::from_yaw(0.0, Vec3(0.5, -0.3, 0.0));
    const IcpResult r = icp(blob, apply_transform(shift, blob), RigidTransform{});
    CHECK((r.transform.translation() - Vec3(0.5, -0.3, 0.0)).norm() < 1e-3);
    CHECK(r.inlier_ratio >= 0.99);
  }
  SUBCASE("far apart clouds have no inliers")
  {
    const RigidTransform far = RigidTransform::from_yaw(0.0, Vec3(100.0, 0.0, 0.0));
    IcpParams p;
    p.corr_dist = 1.0;
    const IcpResult r = icp(blob, apply_transform(far, blob), RigidTransform{}, p);
    CHECK(r.inlier_ratio < 1e-9);
  }
  SUBCASE("result stays orthonormal")
  {
    const RigidTransform t = RigidTransform::from_yaw(0.2, Vec3(0.3, 0.1, 0.0));
    const IcpResult r = icp(blob, apply_transform(t, blob), RigidTransform{});
    const Eigen::Matrix3d rot = r.transform.rotation();
    CHECK((rot.transpose() * rot - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(rot.determinant() == doctest::Approx(1.0));
  }
  SUBCASE("empty input")
  {
    CHECK_THROWS_AS(icp(PointSet{}, blob, RigidTransform{}), ParameterError);
  }
}

TEST_CASE("icp recovers random small rigid motions")
{
  const auto t = suites::icp_suite(100);
  CHECK(t.passed == t.total);
}

TEST_CASE("kabsch recovers an exact transform and rejects degenerate input")
{
  std::mt19937_64 rng(2);
  const PointSet a = suites::icp_cluster(rng, 50);
  const RigidTransform t = RigidTransform::from_yaw(-0.8, Vec3(4, 1, -2));
  const auto k = kabsch(a, apply_transform(t, a));
  REQUIRE(k.has_value());
  CHECK((k->matrix() - t.matrix()).norm() < 1e-9);
  const PointSet same(5, Vec3(1, 1, 1));
  CHECK_FALSE(kabsch(same, same).has_value());
}

namespace
{

/// Static wall and kiosk plus a car-like box shell, optionally shifted.
PointSet street(const Vec3 & car_offset, bool with_car = true)
{
  PointSet pts;
  for (const Vec3 & p : oracle::rectangle_outline(2.0, 3.0, 0.2, 0.0, 2.5)) {
    pts.push_back(p + Vec3(6.0, -4.0, 0.0));
  }
  for (double x = -8; x <= 8; x += 0.25) {
    for (double z = 0.5; z <= 2.5; z += 0.25) {
      pts.emplace_back(x, 8.0, z);
    }
  }
  if (with_car) {
    for (const Vec3 & p : oracle::rectangle_outline(4.4, 1.8, 0.15, 0.4, 1.5)) {
      pts.push_back(p + Vec3(-3.0, -3.0, 0.0) + car_offset);
    }
  }
  return pts;
}

}  // namespace

TEST_CASE("scene flow")
{
  FlowConfig cfg;
  cfg.min_cluster_size = 10;

  SUBCASE("static scene is the zero field")
  {
    const PointSet s = street(Vec3::Zero());
    const FlowField f = estimate_scene_flow(PointCloud::from_points(s), PointCloud::from_points(s), cfg);
    REQUIRE(f.size() == s.size());
    double worst = 0.0;
    for (const Vec3 & v : f) {
      worst = std::max(worst, v.norm());
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("translated car gets its displacement, background stays")
  {
    const PointSet src = street(Vec3::Zero());
    const PointSet dst = street(Vec3(2.0, 0.0, 0.0));
    const FlowField f = estimate_scene_flow(PointCloud::from_points(src), PointCloud::from_points(dst), cfg);
    const std::size_t car_begin = street(Vec3::Zero(), false).size();
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (i >= car_begin) {
        CHECK((f[i] - Vec3(2.0, 0.0, 0.0)).norm() < 0.05);
      } else {
        CHECK(f[i].norm() < 1e-6);
      }
    }
    // Compensation brings the moving points closer to the target.
    const PointSet moved = translate(src, f);
    const KdTree tree(dst);
    std::vector<double> before, after;
    for (std::size_t i = car_begin; i < src.size(); ++i) {
      before.push_back(tree.nearest(src[i]).second);
      after.push_back(tree.nearest(moved[i]).second);
    }
    CHECK(quantile(after, 0.5) <= quantile(before, 0.5));
  }
  SUBCASE("two clusters swapping places pair with their true counterparts")
  {
    // Distinct shapes: a long thin bar and a compact block, exchanging positions.
    PointSet bar, block;
    for (const Vec3 & p : oracle::rectangle_outline(5.0, 1.0, 0.15)) {
      bar.push_back(p);
    }
    for (const Vec3 & p : oracle::rectangle_outline(2.0, 2.0, 0.15)) {
      block.push_back(p);
    }
    const Vec3 a(-2.5, 0, 0), b(2.5, 0, 0);
    PointSet src, dst;
    for (const Vec3 & p : bar) src.push_back(p + a);
    for (const Vec3 & p : block) src.push_back(p + b);
    for (const Vec3 & p : bar) dst.push_back(p + b);
    for (const Vec3 & p : block) dst.push_back(p + a);
    const FlowField f = estimate_scene_flow(PointCloud::from_points(src), PointCloud::from_points(dst), cfg);
    for (std::size_t i = 0; i < bar.size(); ++i) {
      CHECK((f[i] - (b - a)).norm() < 0.1);
    }
    for (std::size_t i = bar.size(); i < src.size(); ++i) {
      CHECK((f[i] - (a - b)).norm() < 0.1);
    }
    // Direct ICP runs confirm the true pairing costs less than the crossed one.
    IcpParams p;
    const RigidTransform to_b = RigidTransform::from_yaw(0.0, b - a);
    const double true_cost = 1.0 - icp(PointSet(src.begin(), src.begin() + bar.size()),
                                       PointSet(dst.begin(), dst.begin() + bar.size()), to_b, p)
                                     .inlier_ratio;
    const double crossed_cost = 1.0 - icp(PointSet(src.begin(), src.begin() + bar.size()),
                                          PointSet(dst.begin() + bar.size(), dst.end()),
                                          RigidTransform{}, p)
                                        .inlier_ratio;
    CHECK(true_cost < crossed_cost);
  }
  SUBCASE("empty source")
  {
    CHECK(estimate_scene_flow(PointCloud{}, PointCloud::from_points(street(Vec3::Zero())), cfg).empty());
  }
}
