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
/// \brief Point-to-point ICP, linear assignment and the cluster-matching scene-flow estimator.
#ifndef RSULABEL__REGISTRATION_HPP_
#define RSULABEL__REGISTRATION_HPP_

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rsulabel/clustering.hpp"
#include "rsulabel/geometry.hpp"
#include "rsulabel/kdtree.hpp"

namespace rsulabel
{

struct IcpParams
{
  int max_iter = 30;
  /// Correspondence gate in meters.
  double corr_dist = 1.0;
  /// Convergence threshold on the per-iteration translation (m) and rotation (rad) increment.
  double tol = 1e-4;
};

struct IcpResult
{
  RigidTransform transform;
  /// Fraction of source points whose aligned nearest target lies closer than corr_dist.
  double inlier_ratio = 0.0;
  /// Root mean square distance over the inliers of the final alignment.
  double inlier_rmse = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Aligns `source` onto `target` starting from `init`. Throws ParameterError on empty input.
/// Degenerate correspondence sets (fewer than three, or collinear) stop the iteration with
/// converged = false and the best transform so far.
IcpResult icp(
  std::span<const Vec3> source, std::span<const Vec3> target, const RigidTransform & init,
  const IcpParams & params = {});

/// Same, against a prebuilt index over `target`.
IcpResult icp(
  std::span<const Vec3> source, const KdTree & target_index, std::span<const Vec3> target,
  const RigidTransform & init, const IcpParams & params = {});

/// Least-squares rotation + translation mapping `from[i]` onto `to[i]` (Kabsch).
/// Returns nullopt when the correspondences are collinear or fewer than three.
std::optional<RigidTransform> kabsch(std::span<const Vec3> from, std::span<const Vec3> to);

/// Rows index source items, columns target items.
using CostMatrix = Eigen::MatrixXd;

struct Assignment
{
  static constexpr int kUnassigned = -1;

  /// Column assigned to each row, or kUnassigned.
  std::vector<int> row_to_col;
  double total_cost = 0.0;

  std::size_t matched() const;
};

/// Minimum total cost matching on a rectangular matrix. Pairs whose cost exceeds
/// `reject_above` are dropped after the solve. Throws ParameterError on non-finite entries.
Assignment hungarian(const CostMatrix & cost, double reject_above = std::numeric_limits<double>::infinity());

/// Per-point displacement aligned with the source ordering.
using FlowField = std::vector<Vec3>;

struct FlowConfig
{
  std::size_t min_cluster_size = 15;
  /// Cluster pairs whose centroids are farther apart than this never get an ICP run.
  double centroid_gate = 10.0;
  /// Cost assigned to gated-out pairs.
  double gated_cost = 1e3;
  /// Matches with cost (1 - inlier ratio) above this are treated as unmatched.
  double max_match_cost = 0.7;
  /// Larger source clusters are registered through an evenly strided subset of this size.
  std::size_t max_icp_points = 1000;
  /// Also run ICP from the identity. Its result replaces the centroid-aligned one when its
  /// inlier ratio is higher by more than `identity_margin`, or within the margin with no
  /// larger inlier RMSE.
  bool try_identity = true;
  double identity_margin = 0.02;
  IcpParams icp;
};

struct SceneFlowDetail
{
  FlowField flow;
  ClusterLabeling source_clusters;
  ClusterLabeling target_clusters;
  CostMatrix cost;
  Assignment assignment;
  /// ICP transform of every matched source cluster, indexed by source cluster id.
  std::vector<std::optional<RigidTransform>> cluster_motion;
};

/// Clusters both clouds with HDBSCAN, scores gated cluster pairs by 1 - ICP inlier ratio
/// (ICP seeded by centroid alignment), solves the assignment, and moves every point of a
/// matched source cluster with its pair's transform. Everything else gets zero flow.
SceneFlowDetail estimate_scene_flow_detailed(
  std::span<const Vec3> source, std::span<const Vec3> target, const FlowConfig & cfg = {});

/// Same, with HDBSCAN labelings of both clouds computed by the caller.
SceneFlowDetail estimate_scene_flow_detailed(
  std::span<const Vec3> source, std::span<const Vec3> target, const ClusterLabeling & source_clusters,
  const ClusterLabeling & target_clusters, const FlowConfig & cfg = {});

FlowField estimate_scene_flow(const PointCloud & source, const PointCloud & target, const FlowConfig & cfg = {});

/// Adds each flow vector to its point.
PointSet translate(std::span<const Vec3> pts, const FlowField & flow);

}  // namespace rsulabel

#endif  // RSULABEL__REGISTRATION_HPP_
