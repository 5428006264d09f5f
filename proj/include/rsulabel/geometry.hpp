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

/// \file
/// \brief Core 3D types, rigid transforms, oriented boxes and L-shape box fitting.
#ifndef RSULABEL__GEOMETRY_HPP_
#define RSULABEL__GEOMETRY_HPP_

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace rsulabel
{

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using PointSet = std::vector<Vec3>;

/// Timestamped point set in the common world frame. Each point carries the id of the
/// RSU LiDAR that produced it, so merged clouds keep their provenance.
struct PointCloud
{
  PointSet points;
  std::vector<int> sensor_ids;
  double timestamp = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void push_back(const Vec3 & p, int sensor_id)
  {
    points.push_back(p);
    sensor_ids.push_back(sensor_id);
  }

  /// Cloud with all points tagged by one sensor.
  static PointCloud from_points(PointSet pts, double timestamp = 0.0, int sensor_id = 0);
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Oriented 3D box. `l` runs along the heading `theta`, `w` across it.
struct BoundingBox
{
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double w = 1.0;
  double l = 1.0;
  double h = 1.0;
  double theta = 0.0;
  double vx = 0.0;
  double vy = 0.0;

  Vec3 center() const { return {cx, cy, cz}; }
  bool valid() const;

  /// Footprint corners in counter-clockwise order.
  std::array<Vec2, 4> footprint() const;
};

/// Homogeneous 4x4 rigid transform with a proper rotation block.
class RigidTransform
{
public:
  RigidTransform() : m_(Eigen::Matrix4d::Identity()) {}

  /// Rotation about +z by `yaw`, then translation.
  static RigidTransform from_yaw(double yaw, const Vec3 & translation);

  /// Throws ParameterError when `rotation` is not orthonormal with det +1 (1e-9).
  static RigidTransform from_rotation(const Eigen::Matrix3d & rotation, const Vec3 & translation);

  const Eigen::Matrix4d & matrix() const { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return m_.topRightCorner<3, 1>(); }

  /// Heading of the rotated x axis projected on the ground plane.
  double yaw() const;

  RigidTransform inverse() const;

  RigidTransform operator*(const RigidTransform & rhs) const;
  Vec3 operator*(const Vec3 & p) const { return rotation() * p + translation(); }

private:
  explicit RigidTransform(const Eigen::Matrix4d & m) : m_(m) {}

  Eigen::Matrix4d m_;
};

/// Body-to-world transform of a box: yaw rotation then translation to the center.
RigidTransform box_to_transform(const BoundingBox & box);

PointSet apply_transform(const RigidTransform & t, std::span<const Vec3> pts);

/// Indices of points whose body-frame coordinates lie inside the box grown by `margin`.
std::vector<std::size_t> indices_in_box(
  std::span<const Vec3> pts, const BoundingBox & box, double margin = 0.0);

PointSet points_in_box(const PointCloud & cloud, const BoundingBox & box, double margin = 0.0);

/// Area of the intersection of two box footprints.
double bev_intersection_area(const BoundingBox & a, const BoundingBox & b);

/// Bird's-eye-view intersection over union of the two footprints.
double bev_iou(const BoundingBox & a, const BoundingBox & b);

struct LShapeParams
{
  double heading_resolution_deg = 1.0;
  double z_low_quantile = 0.01;
  double z_high_quantile = 0.99;
  /// Height floor for clusters with (near) constant z.
  double min_height = 1e-3;
};

/// Tightest oriented box by the variance-of-distance-to-nearest-edge criterion.
///
/// Headings in [0, 90) deg are scanned on a fixed grid. For each heading every point is
/// attributed to the closer of its two nearest rectangle edges; the heading minimising the
/// summed variance of those distances wins (first heading on ties). The footprint is the
/// bounding rectangle at that heading, so every input point lies inside it. The result is
/// reported with l >= w and theta in (-pi/2, pi/2]. Vertical extent comes from z quantiles.
///
/// Throws DegenerateInputError on fewer than three points or plan-view collinear input.
BoundingBox fit_box_lshape(std::span<const Vec3> cluster, const LShapeParams & params = {});

/// Linear-interpolated quantile of `values` (copied and partially sorted).
double quantile(std::vector<double> values, double q);

}  // namespace rsulabel

#endif  // RSULABEL__GEOMETRY_HPP_
