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

#include "rsulabel/discovery.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rsulabel/clustering.hpp"
#include "rsulabel/error.hpp"

namespace rsulabel
{

void DimensionLimits::validate() const
{
  if (!(min_l < max_l && min_w < max_w && min_h < max_h)) {
    throw ConfigError("dimension limits need min < max on every axis");
  }
}

bool DimensionLimits::contains(const BoundingBox & box) const
{
  return box.l >= min_l && box.l <= max_l && box.w >= min_w && box.w <= max_w && box.h >= min_h &&
         box.h <= max_h;
}

void DiscoveryConfig::validate() const
{
  if (scales.empty() || scales.front() != 1.0) {
    throw ConfigError("scales must start at 1.0");
  }
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0 && scales[i] <= 1.0)) {
      throw ConfigError("scales must lie in (0, 1]");
    }
    if (i > 0 && !(scales[i] < scales[i - 1])) {
      throw ConfigError("scales must be strictly descending");
    }
  }
  if (!(eps > 0.0) || min_pts < 1) {
    throw ConfigError("dbscan needs eps > 0 and min_pts >= 1");
  }
  if (!(detection_range > 0.0) || crop_margin < 0.0) {
    throw ConfigError("detection range must be positive");
  }
  if (flow.min_cluster_size < 2 || !(flow.centroid_gate > 0.0) || flow.identity_margin < 0.0 ||
      flow.icp.max_iter < 1 || !(flow.icp.corr_dist > 0.0))
  {
    throw ConfigError(
      "flow needs min_cluster_size >= 2, centroid_gate > 0, identity_margin >= 0, icp.max_iter >= 1 and "
      "icp.corr_dist > 0");
  }
  if (!(ground.distance_threshold > 0.0) || ground.iterations < 1 || !(ground.max_tilt_deg >= 0.0 && ground.max_tilt_deg < 90.0)) {
    throw ConfigError("ground needs distance_threshold > 0, iterations >= 1 and max_tilt_deg in [0, 90)");
  }
  dim_limits.validate();
}

GroundResult remove_ground(const PointCloud & cloud, const GroundParams & params)
{
  GroundResult out;
  const std::size_t n = cloud.size();
  auto keep_all = [&]() {
    out.cloud = cloud;
    out.kept.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.kept[i] = i;
    }
    out.plane_found = false;
    return out;
  };
  if (n < 3) {
    return keep_all();
  }

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> sample;
  if (n <= params.score_sample) {
    sample.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      sample[i] = i;
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    sample.resize(params.score_sample);
    for (auto & s : sample) {
      s = pick(rng);
    }
  }

  const double cos_tilt = std::cos(params.max_tilt_deg * std::numbers::pi / 180.0);
  const auto & pts = cloud.points;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t best_count = 0;
  Eigen::Vector4d best = Eigen::Vector4d::Zero();
  for (int it = 0; it < params.iterations; ++it) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    if (a == b || b == c || a == c) {
      continue;
    }
    Vec3 normal = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    const double norm = normal.norm();
    if (norm < 1e-12) {
      continue;
    }
    normal /= norm;
    if (normal.z() < 0.0) {
      normal = -normal;
    }
    if (normal.z() < cos_tilt) {
      continue;
    }
    const double d = -normal.dot(pts[a]);
    std::size_t count = 0;
    for (std::size_t s : sample) {
      if (std::abs(normal.dot(pts[s]) + d) <= params.distance_threshold) {
        ++count;
      }
    }
    if (count > best_count) {
      best_count = count;
      best << normal, d;
    }
  }
  if (best_count == 0 ||
      static_cast<double>(best_count) < params.min_inlier_fraction * static_cast<double>(sample.size()))
  {
    return keep_all();
  }

  // Least-squares refit on all inliers; kept only if it stays within the tilt bound.
  auto dist = [](const Eigen::Vector4d & plane, const Vec3 & p) { return plane.head<3>().dot(p) + plane(3); };
  Vec3 mean = Vec3::Zero();
  std::size_t inliers = 0;
  for (const auto & p : pts) {
    if (std::abs(dist(best, p)) <= params.distance_threshold) {
      mean += p;
      ++inliers;
    }
  }
  mean /= static_cast<double>(inliers);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto & p : pts) {
    if (std::abs(dist(best, p)) <= params.distance_threshold) {
      cov += (p - mean) * (p - mean).transpose();
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Vec3 normal = es.eigenvectors().col(0);
  if (normal.z() < 0.0) {
    normal = -normal;
  }
  if (normal.z() >= cos_tilt) {
    best << normal, -normal.dot(mean);
  }

  out.plane_found = true;
  out.plane = best;
  out.cloud.timestamp = cloud.timestamp;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(dist(best, pts[i])) > params.distance_threshold) {
      out.kept.push_back(i);
      out.cloud.push_back(pts[i], cloud.sensor_ids.empty() ? 0 : cloud.sensor_ids[i]);
    }
  }
  return out;
}

PointCloud merge_rsu_clouds(std::span<const PointCloud> clouds)
{
  PointCloud out;
  if (clouds.empty()) {
    return out;
  }
  out.timestamp = clouds.front().timestamp;
  for (const auto & c : clouds) {
    if (c.timestamp != out.timestamp) {
      throw ParameterError("merge_rsu_clouds: clouds carry different timestamps");
    }
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    if (c.sensor_ids.size() == c.points.size()) {
      out.sensor_ids.insert(out.sensor_ids.end(), c.sensor_ids.begin(), c.sensor_ids.end());
    } else {
      out.sensor_ids.insert(out.sensor_ids.end(), c.points.size(), 0);
    }
  }
  return out;
}

AggregationResult aggregate_frames(const FrameBundle & bundle, const DiscoveryConfig & cfg)
{
  AggregationResult out;
  out.cloud = bundle.current;
  if (bundle.history.empty()) {
    return out;
  }
  const GroundResult current_ng = remove_ground(bundle.current, cfg.ground);
  const ClusterLabeling current_clusters = hdbscan(current_ng.cloud.points, cfg.flow.min_cluster_size);
  for (std::size_t h = 0; h < bundle.history.size(); ++h) {
    const PointCloud & past = bundle.history[h];
    try {
      if (past.timestamp == bundle.current.timestamp) {
        throw ParameterError("history frame shares the current timestamp");
      }
      const GroundResult past_ng = remove_ground(past, cfg.ground);
      FlowField flow(past.size(), Vec3::Zero());
      if (!past_ng.cloud.empty() && !current_ng.cloud.empty()) {
        const FlowField partial =
          estimate_scene_flow_detailed(
            past_ng.cloud.points, current_ng.cloud.points, hdbscan(past_ng.cloud.points, cfg.flow.min_cluster_size),
            current_clusters, cfg.flow)
            .flow;
        for (std::size_t i = 0; i < partial.size(); ++i) {
          flow[past_ng.kept[i]] = partial[i];
        }
      }
      for (std::size_t i = 0; i < past.size(); ++i) {
        out.cloud.push_back(past.points[i] + flow[i], past.sensor_ids.empty() ? 0 : past.sensor_ids[i]);
      }
    } catch (const Error & e) {
      out.warnings.push_back("history frame " + std::to_string(h) + " skipped: " + e.what());
    }
  }
  return out;
}

std::vector<BoundingBox> filter_by_dimension(std::span<const BoundingBox> boxes, const DimensionLimits & limits)
{
  std::vector<BoundingBox> out;
  std::copy_if(boxes.begin(), boxes.end(), std::back_inserter(out), [&](const BoundingBox & b) {
    return limits.contains(b);
  });
  return out;
}

std::vector<BoundingBox> filter_by_range(std::span<const BoundingBox> boxes, const Vec2 & center, double range)
{
  std::vector<BoundingBox> out;
  for (const auto & b : boxes) {
    const auto corners = b.footprint();
    if (std::all_of(corners.begin(), corners.end(), [&](const Vec2 & c) { return (c - center).norm() <= range; })) {
      out.push_back(b);
    }
  }
  return out;
}

PointCloud crop_cloud(const PointCloud & cloud, const Vec2 & center, double range)
{
  PointCloud out;
  out.timestamp = cloud.timestamp;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if ((cloud.points[i].head<2>() - center).norm() <= range) {
      out.push_back(cloud.points[i], cloud.sensor_ids.empty() ? 0 : cloud.sensor_ids[i]);
    }
  }
  return out;
}

DiscoveryResult discover_detailed(const FrameBundle & bundle, const DiscoveryConfig & cfg)
{
  cfg.validate();
  DiscoveryResult result;

  const double crop = cfg.detection_range + cfg.crop_margin;
  FrameBundle cropped;
  cropped.current = crop_cloud(bundle.current, cfg.center, crop);
  for (const auto & h : bundle.history) {
    cropped.history.push_back(crop_cloud(h, cfg.center, crop));
  }

  AggregationResult agg = aggregate_frames(cropped, cfg);
  result.warnings = std::move(agg.warnings);
  GroundResult ground = remove_ground(agg.cloud, cfg.ground);
  if (!ground.plane_found && !agg.cloud.empty()) {
    result.warnings.emplace_back("no ground plane found; clustering all points");
  }
  result.ground_removed = std::move(ground.cloud);
  const PointSet & pts = result.ground_removed.points;

  std::vector<std::size_t> working(pts.size());
  for (std::size_t i = 0; i < working.size(); ++i) {
    working[i] = i;
  }
  std::vector<char> consumed(pts.size(), 0);

  for (double s : cfg.scales) {
    ScaleTrace trace;
    trace.scale = s;
    trace.working_points = working.size();
    PointSet subset;
    subset.reserve(working.size());
    for (std::size_t i : working) {
      subset.push_back(pts[i]);
    }
    const ClusterLabeling labels = dbscan(scale_points(subset, s), cfg.eps, cfg.min_pts);
    for (const auto & members : labels.members()) {
      std::vector<std::size_t> cluster;
      PointSet cluster_pts;
      cluster.reserve(members.size());
      for (std::size_t m : members) {
        cluster.push_back(working[m]);
        cluster_pts.push_back(pts[working[m]]);
        consumed[working[m]] = 1;
      }
      try {
        result.candidates.push_back(fit_box_lshape(cluster_pts, cfg.lshape));
      } catch (const DegenerateInputError &) {
        // Consumed without a box.
      }
      trace.clusters.push_back(std::move(cluster));
    }
    std::erase_if(working, [&](std::size_t i) { return consumed[i] != 0; });
    result.trace.push_back(std::move(trace));
  }

  const auto sized = filter_by_dimension(result.candidates, cfg.dim_limits);
  result.boxes = filter_by_range(sized, cfg.center, cfg.detection_range);
  for (auto & b : result.boxes) {
    b.vx = 0.0;
    b.vy = 0.0;
  }
  return result;
}

std::vector<BoundingBox> discover(const FrameBundle & bundle, const DiscoveryConfig & cfg)
{
  return discover_detailed(bundle, cfg).boxes;
}

}  // namespace rsulabel
