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

#include "rsulabel/registration.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "rsulabel/error.hpp"

namespace rsulabel
{

std::optional<RigidTransform> kabsch(std::span<const Vec3> from, std::span<const Vec3> to)
{
  if (from.size() != to.size()) {
    throw ParameterError("kabsch: correspondence lists differ in length");
  }
  if (from.size() < 3) {
    return std::nullopt;
  }
  Vec3 cf = Vec3::Zero();
  Vec3 ct = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= static_cast<double>(from.size());
  ct /= static_cast<double>(to.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cov += (from[i] - cf) * (to[i] - ct).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    return std::nullopt;
  }
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  Eigen::Matrix3d r = v * d * u.transpose();
  // Project back onto SO(3) to keep accumulated products orthonormal.
  const Eigen::JacobiSVD<Eigen::Matrix3d> clean(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  r = clean.matrixU() * clean.matrixV().transpose();
  return RigidTransform::from_rotation(r, ct - r * cf);
}

namespace
{

double rotation_angle(const Eigen::Matrix3d & r)
{
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

RigidTransform reorthonormalize(const RigidTransform & t)
{
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(t.rotation(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return RigidTransform::from_rotation(r, t.translation());
}

}  // namespace

IcpResult icp(
  std::span<const Vec3> source, const KdTree & target_index, std::span<const Vec3> target,
  const RigidTransform & init, const IcpParams & params)
{
  if (source.empty() || target.empty()) {
    throw ParameterError("icp: source and target must be non-empty");
  }
  if (!(params.corr_dist > 0.0) || params.max_iter < 0) {
    throw ParameterError("icp: invalid parameters");
  }
  const double gate_sq = params.corr_dist * params.corr_dist;
  IcpResult result;
  result.transform = reorthonormalize(init);

  PointSet from, to;
  from.reserve(source.size());
  to.reserve(source.size());
  for (int iter = 0; iter < params.max_iter; ++iter) {
    from.clear();
    to.clear();
    for (const auto & p : source) {
      const Vec3 q = result.transform * p;
      const auto [idx, d2] = target_index.nearest(q);
      if (d2 < gate_sq) {
        from.push_back(q);
        to.push_back(target[idx]);
      }
    }
    result.iterations = iter + 1;
    const auto step = kabsch(from, to);
    if (!step) {
      result.converged = false;
      break;
    }
    result.transform = reorthonormalize(*step * result.transform);
    if (step->translation().norm() < params.tol && rotation_angle(step->rotation()) < params.tol) {
      result.converged = true;
      break;
    }
  }

  std::size_t inliers = 0;
  double sq_sum = 0.0;
  for (const auto & p : source) {
    const auto [idx, d2] = target_index.nearest(result.transform * p);
    if (d2 < gate_sq) {
      ++inliers;
      sq_sum += d2;
    }
  }
  result.inlier_ratio = static_cast<double>(inliers) / static_cast<double>(source.size());
  result.inlier_rmse = inliers > 0 ? std::sqrt(sq_sum / static_cast<double>(inliers)) : 0.0;
  return result;
}

IcpResult icp(
  std::span<const Vec3> source, std::span<const Vec3> target, const RigidTransform & init,
  const IcpParams & params)
{
  if (target.empty()) {
    throw ParameterError("icp: source and target must be non-empty");
  }
  const KdTree index(target);
  return icp(source, index, target, init, params);
}

std::size_t Assignment::matched() const
{
  return static_cast<std::size_t>(
    std::count_if(row_to_col.begin(), row_to_col.end(), [](int c) { return c != kUnassigned; }));
}

Assignment hungarian(const CostMatrix & cost, double reject_above)
{
  if (!cost.allFinite()) {
    throw ParameterError("hungarian: cost matrix has non-finite entries");
  }
  Assignment out;
  const auto rows = static_cast<std::size_t>(cost.rows());
  const auto cols = static_cast<std::size_t>(cost.cols());
  out.row_to_col.assign(rows, Assignment::kUnassigned);
  if (rows == 0 || cols == 0) {
    return out;
  }

  // Shortest augmenting paths with potentials; requires n <= m, so work on the transpose
  // when there are more rows than columns.
  const bool transposed = rows > cols;
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) {
      continue;
    }
    const std::size_t r = transposed ? j - 1 : p[j] - 1;
    const std::size_t c = transposed ? p[j] - 1 : j - 1;
    const double value = cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    if (value > reject_above) {
      continue;
    }
    out.row_to_col[r] = static_cast<int>(c);
    out.total_cost += value;
  }
  return out;
}

namespace
{

Vec3 centroid(std::span<const Vec3> pts, const std::vector<std::size_t> & idx)
{
  Vec3 c = Vec3::Zero();
  for (std::size_t i : idx) {
    c += pts[i];
  }
  return c / static_cast<double>(idx.size());
}

PointSet gather(std::span<const Vec3> pts, const std::vector<std::size_t> & idx)
{
  PointSet out;
  out.reserve(idx.size());
  for (std::size_t i : idx) {
    out.push_back(pts[i]);
  }
  return out;
}

}  // namespace

SceneFlowDetail estimate_scene_flow_detailed(
  std::span<const Vec3> source, std::span<const Vec3> target, const FlowConfig & cfg)
{
  if (source.empty()) {
    SceneFlowDetail detail;
    detail.target_clusters.labels.assign(target.size(), ClusterLabeling::kNoise);
    return detail;
  }
  return estimate_scene_flow_detailed(
    source, target, hdbscan(source, cfg.min_cluster_size), hdbscan(target, cfg.min_cluster_size), cfg);
}

SceneFlowDetail estimate_scene_flow_detailed(
  std::span<const Vec3> source, std::span<const Vec3> target, const ClusterLabeling & source_clusters,
  const ClusterLabeling & target_clusters, const FlowConfig & cfg)
{
  if (source_clusters.labels.size() != source.size() || target_clusters.labels.size() != target.size()) {
    throw ParameterError("scene flow: labelings do not match the clouds");
  }
  SceneFlowDetail detail;
  detail.flow.assign(source.size(), Vec3::Zero());
  detail.source_clusters = source_clusters;
  detail.target_clusters = target_clusters;
  const auto src_members = detail.source_clusters.members();
  const auto dst_members = detail.target_clusters.members();
  const auto ns = src_members.size();
  const auto nt = dst_members.size();
  detail.cost = CostMatrix::Constant(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nt), cfg.gated_cost);
  detail.cluster_motion.assign(ns, std::nullopt);
  if (ns == 0 || nt == 0) {
    return detail;
  }

  std::vector<PointSet> src_pts(ns), dst_pts(nt);
  std::vector<Vec3> src_c(ns), dst_c(nt);
  for (std::size_t i = 0; i < ns; ++i) {
    src_c[i] = centroid(source, src_members[i]);
    const auto & m = src_members[i];
    if (cfg.max_icp_points > 0 && m.size() > cfg.max_icp_points) {
      std::vector<std::size_t> strided(cfg.max_icp_points);
      for (std::size_t k = 0; k < strided.size(); ++k) {
        strided[k] = m[k * m.size() / strided.size()];
      }
      src_pts[i] = gather(source, strided);
    } else {
      src_pts[i] = gather(source, m);
    }
  }
  std::vector<std::unique_ptr<KdTree>> dst_index(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    dst_pts[j] = gather(target, dst_members[j]);
    dst_c[j] = centroid(target, dst_members[j]);
    dst_index[j] = std::make_unique<KdTree>(dst_pts[j]);
  }

  std::vector<std::vector<std::optional<RigidTransform>>> motion(ns, std::vector<std::optional<RigidTransform>>(nt));
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      if ((src_c[i] - dst_c[j]).norm() > cfg.centroid_gate) {
        continue;
      }
      const auto init = RigidTransform::from_yaw(0.0, dst_c[j] - src_c[i]);
      IcpResult r = icp(src_pts[i], *dst_index[j], dst_pts[j], init, cfg.icp);
      if (cfg.try_identity) {
        IcpResult still = icp(src_pts[i], *dst_index[j], dst_pts[j], RigidTransform(), cfg.icp);
        const bool clearly_better = still.inlier_ratio > r.inlier_ratio + cfg.identity_margin;
        const bool tied = still.inlier_ratio >= r.inlier_ratio - cfg.identity_margin;
        if (clearly_better || (tied && still.inlier_rmse <= r.inlier_rmse)) {
          r = std::move(still);
        }
      }
      detail.cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 - r.inlier_ratio;
      motion[i][j] = r.transform;
    }
  }

  detail.assignment = hungarian(detail.cost, cfg.max_match_cost);
  for (std::size_t i = 0; i < ns; ++i) {
    const int j = detail.assignment.row_to_col[i];
    if (j == Assignment::kUnassigned || !motion[i][static_cast<std::size_t>(j)]) {
      continue;
    }
    const RigidTransform & t = *motion[i][static_cast<std::size_t>(j)];
    detail.cluster_motion[i] = t;
    for (std::size_t k : src_members[i]) {
      detail.flow[k] = t * source[k] - source[k];
    }
  }
  return detail;
}

FlowField estimate_scene_flow(const PointCloud & source, const PointCloud & target, const FlowConfig & cfg)
{
  return estimate_scene_flow_detailed(source.points, target.points, cfg).flow;
}

PointSet translate(std::span<const Vec3> pts, const FlowField & flow)
{
  if (flow.size() != pts.size()) {
    throw ParameterError("translate: flow and points differ in length");
  }
  PointSet out;
  out.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.emplace_back(pts[i] + flow[i]);
  }
  return out;
}

}  // namespace rsulabel
