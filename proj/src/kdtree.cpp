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

#include "rsulabel/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

#include "rsulabel/error.hpp"

namespace rsulabel
{

namespace
{

double box_dist_sq(const Vec3 & q, const Vec3 & lo, const Vec3 & hi)
{
  double d = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double v = q[a] < lo[a] ? lo[a] - q[a] : (q[a] > hi[a] ? q[a] - hi[a] : 0.0);
    d += v * v;
  }
  return d;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
: points_(points), leaf_size_(std::max<std::size_t>(leaf_size, 1))
{
  index_.resize(points_.size());
  std::iota(index_.begin(), index_.end(), std::size_t{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * (points_.size() / leaf_size_ + 1));
    build(0, points_.size());
  }
}

std::size_t KdTree::build(std::size_t begin, std::size_t end)
{
  const std::size_t id = nodes_.size();
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[index_[i]]);
    hi = hi.cwiseMax(points_[index_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= leaf_size_) {
    return id;
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(
    index_.begin() + static_cast<std::ptrdiff_t>(begin), index_.begin() + static_cast<std::ptrdiff_t>(mid),
    index_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
      const double va = points_[a][axis];
      const double vb = points_[b][axis];
      return va < vb || (va == vb && a < b);
    });
  const double split = points_[index_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

template <typename Visit>
void KdTree::visit_radius(const Vec3 & query, double radius_sq, Visit && visit) const
{
  if (nodes_.empty()) {
    return;
  }
  std::size_t stack[128];
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node & node = nodes_[stack[--top]];
    if (box_dist_sq(query, node.lo, node.hi) > radius_sq) {
      continue;
    }
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = index_[i];
        if ((points_[idx] - query).squaredNorm() <= radius_sq) {
          visit(idx);
        }
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
}

std::vector<std::size_t> KdTree::radius_search(const Vec3 & query, double radius) const
{
  if (radius < 0.0) {
    throw ParameterError("radius_search: radius must be non-negative");
  }
  std::vector<std::size_t> out;
  visit_radius(query, radius * radius, [&](std::size_t i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

void KdTree::radius_search(const Vec3 & query, double radius, std::vector<std::size_t> & out) const
{
  if (radius < 0.0) {
    throw ParameterError("radius_search: radius must be non-negative");
  }
  out.clear();
  visit_radius(query, radius * radius, [&](std::size_t i) { out.push_back(i); });
}

std::size_t KdTree::radius_count(const Vec3 & query, double radius) const
{
  std::size_t count = 0;
  visit_radius(query, radius * radius, [&](std::size_t) { ++count; });
  return count;
}

std::vector<std::pair<std::size_t, double>> KdTree::knn(const Vec3 & query, std::size_t k) const
{
  std::vector<std::pair<std::size_t, double>> out;
  if (k == 0 || nodes_.empty()) {
    return out;
  }
  // Max-heap on (distance, index) keeps the k best candidates.
  auto worse = [](const std::pair<double, std::size_t> & a, const std::pair<double, std::size_t> & b) {
    return a < b;
  };
  std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>, decltype(worse)>
    heap(worse);
  auto bound = [&]() {
    return heap.size() < k ? std::numeric_limits<double>::infinity() : heap.top().first;
  };

  // Depth-first, nearer child first.
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const Node & node = nodes_[stack.back()];
    stack.pop_back();
    if (box_dist_sq(query, node.lo, node.hi) > bound()) {
      continue;
    }
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = index_[i];
        const std::pair<double, std::size_t> cand{(points_[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      continue;
    }
    const bool go_left_first = query[node.axis] < node.split;
    stack.push_back(go_left_first ? node.right : node.left);
    stack.push_back(go_left_first ? node.left : node.right);
  }
  out.reserve(heap.size());
  while (!heap.empty()) {
    out.emplace_back(heap.top().second, heap.top().first);
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::pair<std::size_t, double> KdTree::nearest(const Vec3 & query) const
{
  if (nodes_.empty()) {
    throw ParameterError("nearest: empty index");
  }
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_d = std::numeric_limits<double>::infinity();
  std::size_t stack[128];
  std::size_t top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node & node = nodes_[stack[--top]];
    if (box_dist_sq(query, node.lo, node.hi) > best_d) {
      continue;
    }
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = index_[i];
        const double d = (points_[idx] - query).squaredNorm();
        if (d < best_d || (d == best_d && idx < best)) {
          best_d = d;
          best = idx;
        }
      }
      continue;
    }
    const bool go_left_first = query[node.axis] < node.split;
    stack[top++] = go_left_first ? node.right : node.left;
    stack[top++] = go_left_first ? node.left : node.right;
  }
  return {best, best_d};
}

}  // namespace rsulabel
