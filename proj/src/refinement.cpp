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

#include "rsulabel/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "rsulabel/error.hpp"
#include "rsulabel/kdtree.hpp"

namespace rsulabel
{

PointSet to_body_frame(const BoundingBox & instance, std::span<const Vec3> world_pts)
{
  return apply_transform(box_to_transform(instance).inverse(), world_pts);
}

namespace
{

struct Score
{
  double inliers = 0.0;
  double rmse = std::numeric_limits<double>::infinity();

  bool better_than(const Score & o) const
  {
    constexpr double kEps = 1e-9;
    if (inliers > o.inliers + kEps) {
      return true;
    }
    return inliers > o.inliers - kEps && rmse < o.rmse - kEps;
  }
};

Score score_alignment(std::span<const Vec3> src, const KdTree & index, const RigidTransform & t, double gate)
{
  std::size_t hits = 0;
  double sq = 0.0;
  for (const auto & p : src) {
    const double d2 = index.nearest(t * p).second;
    if (d2 < gate * gate) {
      ++hits;
      sq += d2;
    }
  }
  Score s;
  s.inliers = static_cast<double>(hits) / static_cast<double>(src.size());
  s.rmse = hits > 0 ? std::sqrt(sq / static_cast<double>(hits)) : std::numeric_limits<double>::infinity();
  return s;
}

std::pair<Vec3, Vec3> extents(std::span<const Vec3> pts)
{
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto & p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

// Candidate initial alignments: identity, then four quarter turns about the prior yaw,
// each combined with the source extents snapped to the target extents (min, center, max)
// along x and y.
std::vector<RigidTransform> initial_guesses(std::span<const Vec3> src, std::span<const Vec3> target, double prior)
{
  std::vector<RigidTransform> out{RigidTransform()};
  const auto [tlo, thi] = extents(target);
  for (int k = 0; k < 4; ++k) {
    const double yaw = prior + k * std::numbers::pi / 2.0;
    const RigidTransform rot = RigidTransform::from_yaw(yaw, Vec3::Zero());
    const auto [slo, shi] = extents(apply_transform(rot, src));
    const std::array<double, 3> dx{tlo.x() - slo.x(), (tlo.x() + thi.x() - slo.x() - shi.x()) / 2.0, thi.x() - shi.x()};
    const std::array<double, 3> dy{tlo.y() - slo.y(), (tlo.y() + thi.y() - slo.y() - shi.y()) / 2.0, thi.y() - shi.y()};
    const double dz = tlo.z() - slo.z();
    for (double ox : dx) {
      for (double oy : dy) {
        out.push_back(RigidTransform::from_yaw(yaw, Vec3(ox, oy, dz)));
      }
    }
  }
  return out;
}

double transform_yaw(const RigidTransform & t)
{
  const Vec3 x = t * Vec3::UnitX() - t * Vec3::Zero();
  return std::atan2(x.y(), x.x());
}

// Distance between headings, modulo half turns.
double axis_distance(double a, double b)
{
  const double d = std::remainder(a - b, std::numbers::pi);
  return std::abs(d);
}

RigidTransform register_instance(
  const PointSet & src, const PointSet & target, const KdTree & index, double prior, const RefinementParams & params)
{
  RigidTransform start = RigidTransform::from_yaw(prior, Vec3::Zero());
  if (params.multi_hypothesis) {
    PointSet sub;
    const std::size_t stride = std::max<std::size_t>(1, src.size() / std::max<std::size_t>(1, params.hypothesis_points));
    for (std::size_t i = 0; i < src.size(); i += stride) {
      sub.push_back(src[i]);
    }
    IcpParams quick = params.icp;
    quick.max_iter = params.hypothesis_iters;
    std::vector<std::pair<Score, RigidTransform>> tried;
    double best = 0.0;
    for (const auto & guess : initial_guesses(src, target, prior)) {
      const IcpResult r = icp(sub, index, target, guess, quick);
      tried.emplace_back(score_alignment(sub, index, r.transform, params.score_dist), r.transform);
      best = std::max(best, tried.back().first.inliers);
    }
    std::optional<std::pair<double, Score>> chosen;
    for (const auto & [s, t] : tried) {
      if (s.inliers < best - params.hypothesis_tolerance) {
        continue;
      }
      const double d = axis_distance(transform_yaw(t), prior);
      constexpr double kSameAxis = 1e-3;
      if (!chosen || d < chosen->first - kSameAxis || (d < chosen->first + kSameAxis && s.better_than(chosen->second))) {
        chosen = std::make_pair(d, s);
        start = t;
      }
    }
  }
  return icp(src, index, target, start, params.icp).transform;
}

// Local heading consensus around instance i, modulo half turns: point-weighted mean of
// doubled angles over the neighbouring usable instances.
double heading_prior(const Tracklet & tracklet, const std::vector<bool> & usable, std::size_t i, std::size_t window)
{
  const auto & inst = tracklet.instances;
  const std::size_t lo = i > window ? i - window : 0;
  const std::size_t hi = std::min(inst.size(), i + window + 1);
  double s = 0.0;
  double c = 0.0;
  for (std::size_t k = lo; k < hi; ++k) {
    if (!usable[k]) {
      continue;
    }
    const auto wgt = static_cast<double>(inst[k].points.size());
    s += wgt * std::sin(2.0 * inst[k].box.theta);
    c += wgt * std::cos(2.0 * inst[k].box.theta);
  }
  if (s == 0.0 && c == 0.0) {
    return inst[i].box.theta;
  }
  return std::atan2(s, c) / 2.0;
}

}  // namespace

std::optional<CanonicalObject> aggregate_object(const Tracklet & tracklet, const RefinementParams & params)
{
  const auto & inst = tracklet.instances;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    if (inst[i].points.size() >= std::max<std::size_t>(params.min_points, 3)) {
      order.push_back(i);
    }
  }
  if (order.empty()) {
    return std::nullopt;
  }
  // Most points first; earlier timestep on ties.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inst[a].points.size() > inst[b].points.size();
  });

  std::vector<bool> usable(inst.size(), false);
  for (std::size_t i : order) {
    usable[i] = true;
  }
  // Expected rotation from an instance's body frame into the reference frame, given how far
  // each box heading strays from its local consensus.
  auto stray = [&](std::size_t i) {
    return std::remainder(inst[i].box.theta - heading_prior(tracklet, usable, i, params.heading_window), std::numbers::pi);
  };

  CanonicalObject obj;
  obj.reference = order.front();
  const double ref_stray = stray(obj.reference);
  {
    const auto & ref = inst[obj.reference];
    obj.points = to_body_frame(ref.box, ref.points);
    obj.correspondences.push_back({obj.reference, ref.points, obj.points});
  }
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto & cur = inst[order[k]];
    const PointSet body = to_body_frame(cur.box, cur.points);
    const KdTree index(obj.points);
    const double prior = stray(order[k]) - ref_stray;
    const RigidTransform align = register_instance(body, obj.points, index, prior, params);
    PointSet aligned = apply_transform(align, body);
    obj.correspondences.push_back({order[k], cur.points, aligned});
    obj.points.insert(obj.points.end(), aligned.begin(), aligned.end());
  }
  std::sort(obj.correspondences.begin(), obj.correspondences.end(), [](const auto & a, const auto & b) {
    return a.instance < b.instance;
  });
  return obj;
}

std::optional<BoundingBox> refine_dimension(CanonicalObject & obj, const LShapeParams & params)
{
  BoundingBox fit;
  try {
    fit = fit_box_lshape(obj.points, params);
  } catch (const DegenerateInputError &) {
    return std::nullopt;
  }
  obj.l = fit.l;
  obj.w = fit.w;
  obj.h = fit.h;
  const RigidTransform to_canonical = box_to_transform(fit).inverse();
  obj.points = apply_transform(to_canonical, obj.points);
  for (auto & c : obj.correspondences) {
    c.body = apply_transform(to_canonical, c.body);
  }
  return fit;
}

PoseEstimate refine_pose(std::span<const Vec3> world, std::span<const Vec3> body)
{
  if (world.size() != body.size()) {
    throw ParameterError("refine_pose: correspondence lists differ in length");
  }
  if (world.empty()) {
    throw ParameterError("refine_pose: no correspondences");
  }
  const auto n = static_cast<double>(world.size());
  Vec3 cw = Vec3::Zero();
  Vec3 cb = Vec3::Zero();
  for (std::size_t i = 0; i < world.size(); ++i) {
    cw += world[i];
    cb += body[i];
  }
  cw /= n;
  cb /= n;
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    const Vec2 a = (body[i] - cb).head<2>();
    const Vec2 b = (world[i] - cw).head<2>();
    sin_sum += a.x() * b.y() - a.y() * b.x();
    cos_sum += a.x() * b.x() + a.y() * b.y();
    spread += a.squaredNorm();
  }
  if (spread <= 1e-18 * n) {
    throw DegenerateInputError("refine_pose: body points coincide in plan view");
  }
  PoseEstimate pose;
  pose.theta = std::atan2(sin_sum, cos_sum);
  const RigidTransform rot = RigidTransform::from_yaw(pose.theta, Vec3::Zero());
  const Vec3 t = cw - rot * cb;
  pose.cx = t.x();
  pose.cy = t.y();
  pose.cz = t.z();
  return pose;
}

double pose_objective(const RigidTransform & t, std::span<const Vec3> world, std::span<const Vec3> body)
{
  const RigidTransform inv = t.inverse();
  double acc = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    acc += (inv * world[i] - body[i]).squaredNorm();
  }
  return acc;
}

RefinedTracklet refine_tracklet(const Tracklet & tracklet, const RefinementParams & params)
{
  RefinedTracklet out;
  out.tracklet = tracklet;
  auto obj = aggregate_object(tracklet, params);
  if (!obj) {
    out.note = "no instance with enough points";
    return out;
  }
  if (!refine_dimension(*obj, params.lshape)) {
    out.note = "aggregated points are degenerate";
    return out;
  }

  auto & inst = out.tracklet.instances;
  for (auto & i : inst) {
    i.box.l = obj->l;
    i.box.w = obj->w;
    i.box.h = obj->h;
  }
  for (const auto & c : obj->correspondences) {
    try {
      const PoseEstimate pose = refine_pose(c.world, c.body);
      auto & box = inst[c.instance].box;
      box.cx = pose.cx;
      box.cy = pose.cy;
      box.cz = pose.cz;
      box.theta = normalize_angle(pose.theta);
    } catch (const DegenerateInputError &) {
      // Keeps the tracked pose.
    }
  }

  if (inst.size() >= 2) {
    for (std::size_t i = 0; i < inst.size(); ++i) {
      const std::size_t a = i == 0 ? 0 : i - 1;
      const std::size_t b = i + 1 == inst.size() ? i : i + 1;
      const double dt = inst[b].timestamp - inst[a].timestamp;
      if (dt > 0.0) {
        inst[i].box.vx = (inst[b].box.cx - inst[a].box.cx) / dt;
        inst[i].box.vy = (inst[b].box.cy - inst[a].box.cy) / dt;
      }
    }
  }
  out.refined = true;
  return out;
}

}  // namespace rsulabel
