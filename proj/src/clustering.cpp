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

#include "rsulabel/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "rsulabel/error.hpp"
#include "rsulabel/kdtree.hpp"

namespace rsulabel
{

std::vector<std::vector<std::size_t>> ClusterLabeling::members() const
{
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cluster_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) {
      out[static_cast<std::size_t>(labels[i])].push_back(i);
    }
  }
  return out;
}

ClusterLabeling dbscan(std::span<const Vec3> pts, double eps, std::size_t min_pts)
{
  if (!(eps > 0.0)) {
    throw ParameterError("dbscan: eps must be positive");
  }
  if (min_pts < 1) {
    throw ParameterError("dbscan: min_pts must be at least 1");
  }
  ClusterLabeling out;
  out.labels.assign(pts.size(), ClusterLabeling::kNoise);
  if (pts.empty()) {
    return out;
  }

  const KdTree tree(pts);
  std::vector<char> visited(pts.size(), 0);
  std::vector<char> queued(pts.size(), 0);
  std::vector<std::size_t> frontier;
  std::vector<std::size_t> nbrs;
  for (std::size_t seed = 0; seed < pts.size(); ++seed) {
    if (visited[seed]) {
      continue;
    }
    visited[seed] = 1;
    tree.radius_search(pts[seed], eps, nbrs);
    if (nbrs.size() < min_pts) {
      continue;  // noise for now; may become a border point later
    }
    const int id = out.cluster_count++;
    out.labels[seed] = id;
    auto absorb = [&]() {
      for (std::size_t r : nbrs) {
        if (out.labels[r] == ClusterLabeling::kNoise) {
          out.labels[r] = id;
        }
        if (!visited[r] && !queued[r]) {
          queued[r] = 1;
          frontier.push_back(r);
        }
      }
    };
    absorb();
    while (!frontier.empty()) {
      const std::size_t q = frontier.back();
      frontier.pop_back();
      visited[q] = 1;
      tree.radius_search(pts[q], eps, nbrs);
      if (nbrs.size() >= min_pts) {
        absorb();
      }
    }
  }
  return out;
}

namespace
{

struct UnionFind
{
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x)
  {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
};

struct MstEdge
{
  std::size_t a;
  std::size_t b;
  double weight;
};

std::vector<double> core_distances(std::span<const Vec3> pts, std::size_t k)
{
  const KdTree tree(pts);
  std::vector<double> core(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    core[i] = std::sqrt(tree.knn(pts[i], k).back().second);
  }
  return core;
}

std::vector<MstEdge> mutual_reachability_mst(std::span<const Vec3> pts, const std::vector<double> & core)
{
  // Dense Prim on squared mutual reachability; vertices outside the tree are kept in a
  // compact structure-of-arrays list. Ties pick the lowest point index.
  const std::size_t n = pts.size();
  std::vector<MstEdge> edges;
  edges.reserve(n - 1);
  std::vector<double> xs(n), ys(n), zs(n), core_sq(n), best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> ids(n), from(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = pts[i].x();
    ys[i] = pts[i].y();
    zs[i] = pts[i].z();
    core_sq[i] = core[i] * core[i];
    ids[i] = i;
  }
  auto remove_slot = [&](std::size_t slot, std::size_t last) {
    xs[slot] = xs[last];
    ys[slot] = ys[last];
    zs[slot] = zs[last];
    core_sq[slot] = core_sq[last];
    best[slot] = best[last];
    ids[slot] = ids[last];
    from[slot] = from[last];
  };
  std::size_t remaining = n;
  std::size_t current = 0;
  Vec3 pc = pts[0];
  double cc = core_sq[0];
  remove_slot(0, --remaining);
  while (remaining > 0) {
    std::size_t next = 0;
    double next_w = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < remaining; ++k) {
      const double dx = xs[k] - pc.x();
      const double dy = ys[k] - pc.y();
      const double dz = zs[k] - pc.z();
      const double d = std::max(std::max(dx * dx + dy * dy + dz * dz, cc), core_sq[k]);
      if (d < best[k]) {
        best[k] = d;
        from[k] = current;
      }
      if (best[k] < next_w || (best[k] == next_w && ids[k] < ids[next])) {
        next_w = best[k];
        next = k;
      }
    }
    current = ids[next];
    edges.push_back({from[next], current, std::sqrt(next_w)});
    pc = pts[current];
    cc = core_sq[next];
    remove_slot(next, --remaining);
  }
  std::stable_sort(edges.begin(), edges.end(), [](const MstEdge & x, const MstEdge & y) { return x.weight < y.weight; });
  return edges;
}

constexpr double kMaxLambda = 1e12;

double to_lambda(double distance) { return distance > 1.0 / kMaxLambda ? 1.0 / distance : kMaxLambda; }

}  // namespace

HdbscanResult hdbscan_tree(std::span<const Vec3> pts, std::size_t min_cluster_size)
{
  if (min_cluster_size < 2) {
    throw ParameterError("hdbscan: min_cluster_size must be at least 2");
  }
  const std::size_t n = pts.size();
  HdbscanResult result;
  result.labeling.labels.assign(n, ClusterLabeling::kNoise);
  if (n < min_cluster_size) {
    return result;
  }

  const auto core = core_distances(pts, min_cluster_size);
  const auto mst = mutual_reachability_mst(pts, core);

  // Single-linkage dendrogram: node ids [0, n) are points, n + i is the i-th merge.
  const std::size_t node_count = 2 * n - 1;
  std::vector<std::size_t> left(node_count, 0), right(node_count, 0), size(node_count, 1);
  std::vector<double> height(node_count, 0.0);
  {
    UnionFind uf(node_count);
    for (std::size_t i = 0; i < mst.size(); ++i) {
      const std::size_t ra = uf.find(mst[i].a);
      const std::size_t rb = uf.find(mst[i].b);
      const std::size_t id = n + i;
      left[id] = ra;
      right[id] = rb;
      size[id] = size[ra] + size[rb];
      height[id] = mst[i].weight;
      uf.parent[ra] = id;
      uf.parent[rb] = id;
    }
  }

  // Condense top-down.
  const std::size_t root = node_count - 1;
  std::vector<std::size_t> relabel(node_count, 0);
  std::vector<char> ignore(node_count, 0);
  std::size_t next_label = n + 1;
  relabel[root] = n;
  auto & tree = result.condensed_tree;

  auto leaves_of = [&](std::size_t node, std::vector<std::size_t> & out) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t x = stack.back();
      stack.pop_back();
      if (x < n) {
        out.push_back(x);
      } else {
        ignore[x] = 1;
        stack.push_back(right[x]);
        stack.push_back(left[x]);
      }
    }
  };

  std::deque<std::size_t> queue{root};
  std::vector<std::size_t> fallen;
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    if (node < n || ignore[node]) {
      continue;
    }
    const std::size_t l = left[node];
    const std::size_t r = right[node];
    const double lambda = to_lambda(height[node]);
    const bool l_big = size[l] >= min_cluster_size;
    const bool r_big = size[r] >= min_cluster_size;
    if (l_big && r_big) {
      for (std::size_t child : {l, r}) {
        relabel[child] = next_label++;
        tree.push_back({relabel[node], relabel[child], lambda, size[child]});
        queue.push_back(child);
      }
    } else {
      for (std::size_t child : {l, r}) {
        if (size[child] >= min_cluster_size) {
          relabel[child] = relabel[node];
          queue.push_back(child);
        } else {
          fallen.clear();
          leaves_of(child, fallen);
          for (std::size_t p : fallen) {
            tree.push_back({relabel[node], p, lambda, 1});
          }
        }
      }
    }
  }

  // Excess-of-mass stability.
  const std::size_t cluster_count = next_label - n;
  std::vector<double> birth(cluster_count, 0.0);
  std::vector<std::vector<std::size_t>> children(cluster_count);
  for (const auto & e : tree) {
    if (e.child_size > 1) {
      birth[e.child - n] = e.lambda;
      children[e.parent - n].push_back(e.child);
    }
  }
  auto & stability = result.stability;
  stability.assign(cluster_count, 0.0);
  for (const auto & e : tree) {
    stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * static_cast<double>(e.child_size);
  }

  // Bottom-up selection; children always carry larger ids than their parent.
  std::vector<double> best = stability;
  std::vector<char> selected(cluster_count, 1);
  for (std::size_t c = cluster_count; c-- > 0;) {
    double subtree = 0.0;
    for (std::size_t child : children[c]) {
      subtree += best[child - n];
    }
    if (!children[c].empty() && subtree > stability[c]) {
      selected[c] = 0;
      best[c] = subtree;
    } else {
      std::vector<std::size_t> stack(children[c]);
      while (!stack.empty()) {
        const std::size_t d = stack.back() - n;
        stack.pop_back();
        selected[d] = 0;
        stack.insert(stack.end(), children[d].begin(), children[d].end());
      }
    }
  }
  for (std::size_t c = 0; c < cluster_count; ++c) {
    if (selected[c]) {
      result.selected.push_back(c + n);
    }
  }

  // Map each point to the selected ancestor of the cluster it fell out of.
  std::vector<std::size_t> parent_of(cluster_count, 0);
  for (const auto & e : tree) {
    if (e.child_size > 1) {
      parent_of[e.child - n] = e.parent;
    }
  }
  std::vector<long> owner(cluster_count, -1);
  for (std::size_t c = 0; c < cluster_count; ++c) {
    std::size_t x = c + n;
    while (true) {
      if (selected[x - n]) {
        owner[c] = static_cast<long>(x);
        break;
      }
      if (x == n) {
        break;
      }
      x = parent_of[x - n];
    }
  }
  std::vector<long> point_owner(n, -1);
  for (const auto & e : tree) {
    if (e.child_size == 1) {
      point_owner[e.child] = owner[e.parent - n];
    }
  }

  // Number clusters by their lowest-index member.
  std::vector<int> id_of(cluster_count, -1);
  auto & lab = result.labeling;
  for (std::size_t i = 0; i < n; ++i) {
    if (point_owner[i] < 0) {
      continue;
    }
    const auto c = static_cast<std::size_t>(point_owner[i]) - n;
    if (id_of[c] < 0) {
      id_of[c] = lab.cluster_count++;
    }
    lab.labels[i] = id_of[c];
  }
  return result;
}

ClusterLabeling hdbscan(std::span<const Vec3> pts, std::size_t min_cluster_size)
{
  return hdbscan_tree(pts, min_cluster_size).labeling;
}

PointSet scale_points(std::span<const Vec3> pts, double s)
{
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw ParameterError("scale factor must be positive");
  }
  PointSet out;
  out.reserve(pts.size());
  for (const auto & p : pts) {
    out.emplace_back(p * s);
  }
  return out;
}

PointSet inverse_scale(std::span<const Vec3> pts, double s)
{
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw ParameterError("scale factor must be positive");
  }
  PointSet out;
  out.reserve(pts.size());
  for (const auto & p : pts) {
    out.emplace_back(p / s);
  }
  return out;
}

}  // namespace rsulabel
