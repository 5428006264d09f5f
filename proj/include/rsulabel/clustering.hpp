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

#ifndef RSULABEL__CLUSTERING_HPP_
#define RSULABEL__CLUSTERING_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

/// Per-point cluster ids: -1 is noise, clusters are numbered 0..cluster_count-1 in order of
/// their lowest-index member.
struct ClusterLabeling
{
  static constexpr int kNoise = -1;

  std::vector<int> labels;
  int cluster_count = 0;

  /// Member indices of every cluster, each list ascending.
  std::vector<std::vector<std::size_t>> members() const;
};

/// DBSCAN. The neighbourhood of a point includes the point itself and every point at
/// distance <= eps; a point is core when its neighbourhood holds at least `min_pts`
/// points. Points are seeded in index order, so a border point reachable from several
/// clusters joins the one with the lowest id.
ClusterLabeling dbscan(std::span<const Vec3> pts, double eps, std::size_t min_pts);

/// One row of the condensed cluster tree: `child` is a cluster id when child_size > 1,
/// otherwise a point index that fell out of `parent` at density level `lambda`.
struct CondensedEdge
{
  std::size_t parent;
  std::size_t child;
  double lambda;
  std::size_t child_size;
};

struct HdbscanResult
{
  ClusterLabeling labeling;
  /// Condensed tree; cluster ids start at the number of points (root = n).
  std::vector<CondensedEdge> condensed_tree;
  /// Excess-of-mass stability per condensed cluster, indexed by (cluster id - n).
  std::vector<double> stability;
  /// Condensed cluster ids chosen by the selection, ascending.
  std::vector<std::size_t> selected;
};

/// HDBSCAN* with core distance k = min_cluster_size (the k-th nearest neighbour counting the
/// point itself), mutual-reachability MST, condensed tree and excess-of-mass selection.
/// The root may be selected, so a single dense blob yields one cluster.
/// MST ties resolve towards lower point indices.
HdbscanResult hdbscan_tree(std::span<const Vec3> pts, std::size_t min_cluster_size);

ClusterLabeling hdbscan(std::span<const Vec3> pts, std::size_t min_cluster_size);

/// Multiplies every coordinate by `s` about the origin. Throws ParameterError when s <= 0.
PointSet scale_points(std::span<const Vec3> pts, double s);

/// Divides every coordinate by `s`. Throws ParameterError when s <= 0.
PointSet inverse_scale(std::span<const Vec3> pts, double s);

}  // namespace rsulabel

#endif  // RSULABEL__CLUSTERING_HPP_
