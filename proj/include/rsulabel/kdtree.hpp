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

#ifndef RSULABEL__KDTREE_HPP_
#define RSULABEL__KDTREE_HPP_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

/// Balanced k-d tree over a borrowed 3D point array. Median splits on the widest axis,
/// leaves hold at most `leaf_size` points. The indexed points must outlive the tree.
/// Queries are const and safe to issue concurrently once built.
class KdTree
{
public:
  static constexpr std::size_t kDefaultLeafSize = 16;

  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = kDefaultLeafSize);

  std::size_t size() const { return points_.size(); }

  /// Indices of all points with distance <= radius, sorted ascending.
  std::vector<std::size_t> radius_search(const Vec3 & query, double radius) const;

  /// Same set as radius_search, written to `out` in traversal order.
  void radius_search(const Vec3 & query, double radius, std::vector<std::size_t> & out) const;

  /// Number of points with distance <= radius.
  std::size_t radius_count(const Vec3 & query, double radius) const;

  /// The k nearest points as (index, squared distance), closest first; ties broken by index.
  std::vector<std::pair<std::size_t, double>> knn(const Vec3 & query, std::size_t k) const;

  /// Nearest point as (index, squared distance). Tree must be non-empty.
  std::pair<std::size_t, double> nearest(const Vec3 & query) const;

private:
  struct Node
  {
    // Leaves: [begin, end) into index_. Inner nodes: split axis/value and children.
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    Vec3 lo;
    Vec3 hi;
  };

  std::size_t build(std::size_t begin, std::size_t end);

  template <typename Visit>
  void visit_radius(const Vec3 & query, double radius_sq, Visit && visit) const;

  std::span<const Vec3> points_;
  std::size_t leaf_size_;
  std::vector<std::size_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace rsulabel

#endif  // RSULABEL__KDTREE_HPP_
