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

#include "rsulabel/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rsulabel/error.hpp"

namespace rsulabel
{

PointCloud PointCloud::from_points(PointSet pts, double timestamp, int sensor_id)
{
  PointCloud cloud;
  cloud.sensor_ids.assign(pts.size(), sensor_id);
  cloud.points = std::move(pts);
  cloud.timestamp = timestamp;
  return cloud;
}

double normalize_angle(double a)
{
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) {
    a += kTwoPi;
  } else if (a > std::numbers::pi) {
    a -= kTwoPi;
  }
  return a;
}

bool BoundingBox::valid() const
{
  const bool finite = std::isfinite(cx) && std::isfinite(cy) && std::isfinite(cz) &&
                      std::isfinite(theta) && std::isfinite(vx) && std::isfinite(vy);
  return finite && w > 0.0 && l > 0.0 && h > 0.0 && std::isfinite(w) && std::isfinite(l) &&
         std::isfinite(h);
}

std::array<Vec2, 4> BoundingBox::footprint() const
{
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Vec2 along(c * l / 2.0, s * l / 2.0);
  const Vec2 across(-s * w / 2.0, c * w / 2.0);
  const Vec2 ctr(cx, cy);
  return {ctr + along + across, ctr - along + across, ctr - along - across, ctr + along - across};
}

RigidTransform RigidTransform::from_yaw(double yaw, const Vec3 & translation)
{
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  m.topRightCorner<3, 1>() = translation;
  return RigidTransform(m);
}

RigidTransform RigidTransform::from_rotation(const Eigen::Matrix3d & rotation, const Vec3 & translation)
{
  const double ortho_err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!rotation.allFinite() || !translation.allFinite() || ortho_err > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9)
  {
    throw ParameterError("rotation block is not a proper orthonormal matrix");
  }
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return RigidTransform(m);
}

double RigidTransform::yaw() const { return std::atan2(m_(1, 0), m_(0, 0)); }

RigidTransform RigidTransform::inverse() const
{
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  const Eigen::Matrix3d rt = rotation().transpose();
  m.topLeftCorner<3, 3>() = rt;
  m.topRightCorner<3, 1>() = -rt * translation();
  return RigidTransform(m);
}

RigidTransform RigidTransform::operator*(const RigidTransform & rhs) const
{
  Eigen::Matrix4d m = m_ * rhs.m_;
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  return RigidTransform(m);
}

RigidTransform box_to_transform(const BoundingBox & box)
{
  return RigidTransform::from_yaw(box.theta, box.center());
}

PointSet apply_transform(const RigidTransform & t, std::span<const Vec3> pts)
{
  const Eigen::Matrix3d r = t.rotation();
  const Vec3 tr = t.translation();
  PointSet out;
  out.reserve(pts.size());
  for (const auto & p : pts) {
    out.emplace_back(r * p + tr);
  }
  return out;
}

std::vector<std::size_t> indices_in_box(std::span<const Vec3> pts, const BoundingBox & box, double margin)
{
  if (margin < 0.0) {
    throw ParameterError("points_in_box: margin must be non-negative");
  }
  const RigidTransform world_to_body = box_to_transform(box).inverse();
  const Vec3 half(box.l / 2.0 + margin, box.w / 2.0 + margin, box.h / 2.0 + margin);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 b = world_to_body * pts[i];
    if (std::abs(b.x()) <= half.x() && std::abs(b.y()) <= half.y() && std::abs(b.z()) <= half.z()) {
      idx.push_back(i);
    }
  }
  return idx;
}

PointSet points_in_box(const PointCloud & cloud, const BoundingBox & box, double margin)
{
  PointSet out;
  for (std::size_t i : indices_in_box(cloud.points, box, margin)) {
    out.push_back(cloud.points[i]);
  }
  return out;
}

namespace
{

double cross2(const Vec2 & a, const Vec2 & b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Vec2> & poly)
{
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross2(poly[i], poly[(i + 1) % poly.size()]);
  }
  return std::abs(area) / 2.0;
}

// Sutherland-Hodgman clipping of a polygon by a convex, counter-clockwise clip polygon.
std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::array<Vec2, 4> & clip)
{
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2 & a = clip[e];
    const Vec2 & b = clip[(e + 1) % clip.size()];
    const Vec2 edge = b - a;
    auto side = [&](const Vec2 & p) { return cross2(edge, p - a); };
    std::vector<Vec2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2 & cur = subject[i];
      const Vec2 & nxt = subject[(i + 1) % subject.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) {
        out.push_back(cur);
      }
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace

double bev_intersection_area(const BoundingBox & a, const BoundingBox & b)
{
  const double reach = std::hypot(a.l, a.w) / 2.0 + std::hypot(b.l, b.w) / 2.0;
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= reach) {
    return 0.0;
  }
  const auto fa = a.footprint();
  const auto fb = b.footprint();
  const auto poly = clip_convex(std::vector<Vec2>(fa.begin(), fa.end()), fb);
  return poly.size() < 3 ? 0.0 : polygon_area(poly);
}

double bev_iou(const BoundingBox & a, const BoundingBox & b)
{
  const double inter = bev_intersection_area(a, b);
  const double uni = a.l * a.w + b.l * b.w - inter;
  if (uni <= 0.0) {
    return 0.0;
  }
  return std::clamp(inter / uni, 0.0, 1.0);
}

double quantile(std::vector<double> values, double q)
{
  if (values.empty()) {
    throw ParameterError("quantile of an empty set");
  }
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double vlo = values[lo];
  if (hi == lo) {
    return vlo;
  }
  const double vhi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return vlo + (pos - static_cast<double>(lo)) * (vhi - vlo);
}

namespace
{

double variance(const std::vector<double> & v)
{
  if (v.size() < 2) {
    return 0.0;
  }
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) {
    acc += (x - mean) * (x - mean);
  }
  return acc / static_cast<double>(v.size());
}

void check_plan_view(std::span<const Vec3> cluster)
{
  if (cluster.size() < 3) {
    throw DegenerateInputError("box fitting needs at least 3 points");
  }
  Vec2 mean = Vec2::Zero();
  for (const auto & p : cluster) {
    mean += p.head<2>();
  }
  mean /= static_cast<double>(cluster.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto & p : cluster) {
    const Vec2 d = p.head<2>() - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(cluster.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(1);
  if (!(hi > 0.0) || lo <= 1e-12 * std::max(1.0, hi)) {
    throw DegenerateInputError("box fitting input is collinear in plan view");
  }
}

}  // namespace

BoundingBox fit_box_lshape(std::span<const Vec3> cluster, const LShapeParams & params)
{
  check_plan_view(cluster);
  if (!(params.heading_resolution_deg > 0.0)) {
    throw ParameterError("heading resolution must be positive");
  }

  const auto steps = static_cast<int>(std::ceil(90.0 / params.heading_resolution_deg - 1e-9));
  const std::size_t n = cluster.size();
  std::vector<double> c1(n), c2(n), e1, e2;
  e1.reserve(n);
  e2.reserve(n);

  double best_score = std::numeric_limits<double>::infinity();
  double best_theta = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double theta = static_cast<double>(k) * params.heading_resolution_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    double min1 = std::numeric_limits<double>::infinity(), max1 = -min1;
    double min2 = min1, max2 = -min1;
    for (std::size_t i = 0; i < n; ++i) {
      c1[i] = c * cluster[i].x() + s * cluster[i].y();
      c2[i] = -s * cluster[i].x() + c * cluster[i].y();
      min1 = std::min(min1, c1[i]);
      max1 = std::max(max1, c1[i]);
      min2 = std::min(min2, c2[i]);
      max2 = std::max(max2, c2[i]);
    }
    e1.clear();
    e2.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const double d1 = std::min(max1 - c1[i], c1[i] - min1);
      const double d2 = std::min(max2 - c2[i], c2[i] - min2);
      if (d1 < d2) {
        e1.push_back(d1);
      } else {
        e2.push_back(d2);
      }
    }
    const double score = variance(e1) + variance(e2);
    if (score < best_score) {
      best_score = score;
      best_theta = theta;
    }
  }

  const double c = std::cos(best_theta);
  const double s = std::sin(best_theta);
  double min1 = std::numeric_limits<double>::infinity(), max1 = -min1;
  double min2 = min1, max2 = -min1;
  std::vector<double> zs;
  zs.reserve(n);
  for (const auto & p : cluster) {
    const double a = c * p.x() + s * p.y();
    const double b = -s * p.x() + c * p.y();
    min1 = std::min(min1, a);
    max1 = std::max(max1, a);
    min2 = std::min(min2, b);
    max2 = std::max(max2, b);
    zs.push_back(p.z());
  }
  const double m1 = (min1 + max1) / 2.0;
  const double m2 = (min2 + max2) / 2.0;
  const double z_lo = quantile(zs, params.z_low_quantile);
  const double z_hi = quantile(std::move(zs), params.z_high_quantile);

  BoundingBox box;
  box.cx = m1 * c - m2 * s;
  box.cy = m1 * s + m2 * c;
  box.cz = (z_lo + z_hi) / 2.0;
  box.h = std::max(z_hi - z_lo, params.min_height);
  const double len1 = max1 - min1;
  const double len2 = max2 - min2;
  if (len1 >= len2) {
    box.l = len1;
    box.w = len2;
    box.theta = best_theta;
  } else {
    box.l = len2;
    box.w = len1;
    box.theta = best_theta + std::numbers::pi / 2.0;
  }
  if (box.theta > std::numbers::pi / 2.0) {
    box.theta -= std::numbers::pi;
  }
  return box;
}

}  // namespace rsulabel
