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
/// \brief Multi-frame, multi-scale object discovery on merged RSU point clouds.
#ifndef RSULABEL__DISCOVERY_HPP_
#define RSULABEL__DISCOVERY_HPP_

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsulabel/geometry.hpp"
#include "rsulabel/registration.hpp"

namespace rsulabel
{

/// Closed intervals on box dimensions, meters.
struct DimensionLimits
{
  double min_l = 2.0;
  double max_l = 15.0;
  double min_w = 1.0;
  double max_w = 4.0;
  double min_h = 1.0;
  double max_h = 4.5;

  void validate() const;
  bool contains(const BoundingBox & box) const;
};

struct GroundParams
{
  double distance_threshold = 0.15;
  /// Largest accepted angle between the plane normal and +z.
  double max_tilt_deg = 15.0;
  int iterations = 100;
  /// The best plane must explain at least this fraction of the points.
  double min_inlier_fraction = 0.1;
  /// Hypotheses are scored on at most this many points.
  std::size_t score_sample = 20000;
  std::uint64_t seed = 0;
};

struct GroundResult
{
  PointCloud cloud;
  /// Indices (into the input) of the points that were kept.
  std::vector<std::size_t> kept;
  bool plane_found = false;
  /// Plane (n, d) with n.p + d = 0 and n.z > 0; zero when no plane was found.
  Eigen::Vector4d plane = Eigen::Vector4d::Zero();
};

/// RANSAC ground plane restricted to near-horizontal normals; removes the inliers.
/// When no plane with enough support exists the input is returned unchanged and
/// `plane_found` is false.
GroundResult remove_ground(const PointCloud & cloud, const GroundParams & params = {});

struct DiscoveryConfig
{
  std::vector<double> scales{1.0, 0.7, 0.5};
  double eps = 0.7;
  std::size_t min_pts = 5;
  DimensionLimits dim_limits;
  GroundParams ground;
  FlowConfig flow;
  /// Boxes must lie entirely within this distance of `center` (plan view).
  double detection_range = 50.0;
  Vec2 center = Vec2::Zero();
  /// Points farther than detection_range + crop_margin are dropped before processing.
  double crop_margin = 15.0;
  /// Number of neighbouring frames aggregated into each timestep.
  std::size_t history_frames = 2;
  LShapeParams lshape;

  void validate() const;
};

/// Current cloud plus k clouds from other timesteps, all in the world frame.
struct FrameBundle
{
  PointCloud current;
  std::vector<PointCloud> history;
};

/// Concatenates synchronized clouds, keeping sensor tags. Throws ParameterError when the
/// timestamps differ.
PointCloud merge_rsu_clouds(std::span<const PointCloud> clouds);

struct AggregationResult
{
  PointCloud cloud;
  std::vector<std::string> warnings;
};

/// Moves every history cloud onto the current timestep with its scene flow and unions
/// the result with the current cloud. Flow runs on non-ground points only; ground points
/// stay where they are. A history frame whose flow fails is skipped with a warning.
AggregationResult aggregate_frames(const FrameBundle & bundle, const DiscoveryConfig & cfg);

/// Keeps boxes with l, w and h inside the closed limits.
std::vector<BoundingBox> filter_by_dimension(std::span<const BoundingBox> boxes, const DimensionLimits & limits);

/// Keeps boxes whose four footprint corners lie within `range` of `center`.
std::vector<BoundingBox> filter_by_range(std::span<const BoundingBox> boxes, const Vec2 & center, double range);

/// Drops points farther than `range` from `center` in plan view.
PointCloud crop_cloud(const PointCloud & cloud, const Vec2 & center, double range);

struct ScaleTrace
{
  double scale = 1.0;
  /// Size of the working cloud entering this scale.
  std::size_t working_points = 0;
  /// Cluster members at this scale, as indices into `DiscoveryResult::ground_removed`.
  std::vector<std::vector<std::size_t>> clusters;
};

struct DiscoveryResult
{
  std::vector<BoundingBox> boxes;
  /// Every fitted box before dimension and range filtering.
  std::vector<BoundingBox> candidates;
  PointCloud ground_removed;
  std::vector<ScaleTrace> trace;
  std::vector<std::string> warnings;
};

/// Aggregation, ground removal, then DBSCAN at each scale from large to small. Each cluster
/// is fitted with an L-shape box and its points leave the working cloud before the next
/// scale. Boxes outside the dimension limits or detection range are dropped at the end.
DiscoveryResult discover_detailed(const FrameBundle & bundle, const DiscoveryConfig & cfg);

std::vector<BoundingBox> discover(const FrameBundle & bundle, const DiscoveryConfig & cfg);

}  // namespace rsulabel

#endif  // RSULABEL__DISCOVERY_HPP_
