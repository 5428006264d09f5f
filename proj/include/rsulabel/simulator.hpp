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
/// \brief Deterministic synthetic intersection: box-shell vehicles, elevated ray-casting
/// LiDARs and exact ground truth.
#ifndef RSULABEL__SIMULATOR_HPP_
#define RSULABEL__SIMULATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

struct RsuPose
{
  int sensor_id = 0;
  /// LiDAR origin; z is the mounting height above the ground plane.
  Vec3 position = Vec3(0.0, 0.0, 6.0);
};

struct Waypoint
{
  int frame = 0;
  Vec2 position = Vec2::Zero();
};

/// Vehicle moving with constant velocity between consecutive waypoints. A single waypoint
/// means a parked vehicle with heading `yaw`; otherwise the heading follows the motion.
struct VehicleSpec
{
  double l = 4.5;
  double w = 1.9;
  double h = 1.6;
  double yaw = 0.0;
  std::vector<Waypoint> waypoints;
  int spawn_frame = 0;
  /// First frame without the vehicle; negative means it stays until the end.
  int despawn_frame = -1;
};

struct SamplingParams
{
  double azimuth_res_deg = 0.6;
  double elevation_res_deg = 0.8;
  double elevation_min_deg = -60.0;
  double elevation_max_deg = -2.0;
  double range_noise = 0.02;
  double max_range = 70.0;
};

struct SimConfig
{
  std::uint64_t seed = 0;
  int frames = 10;
  double frame_dt = 0.1;
  std::vector<RsuPose> rsus{RsuPose{}};
  std::vector<VehicleSpec> vehicles;
  /// Static structures (walls, buildings): they occlude and return points but are not labels.
  std::vector<BoundingBox> occluders;
  SamplingParams sampling;
  /// Half-size of the square ground plane around the origin.
  double ground_extent = 70.0;
  double vehicle_dropout = 0.0;
  double ground_dropout = 0.0;
  double occluder_dropout = 0.0;

  /// Throws ConfigError on invalid values or vehicles whose footprints overlap in some frame.
  void validate() const;
};

struct SimFrame
{
  int index = 0;
  double timestamp = 0.0;
  /// One cloud per RSU, in `SimConfig::rsus` order.
  std::vector<PointCloud> clouds;
  /// Per RSU, per point: vehicle index, kGround or kOccluder. Diagnostics only.
  std::vector<std::vector<int>> point_labels;
  std::vector<BoundingBox> ground_truth;
  /// Vehicle index of each ground-truth box.
  std::vector<int> ground_truth_ids;

  static constexpr int kGround = -1;
  static constexpr int kOccluder = -2;
};

struct SimOutput
{
  std::vector<SimFrame> frames;
};

/// Pose (center at half height, yaw, planar velocity) of a vehicle at `frame`, or nullopt
/// when it is not present.
std::optional<BoundingBox> vehicle_box(const VehicleSpec & v, int frame, double frame_dt);

/// Casts the angular ray grid of every RSU against the ground, the vehicles and the
/// occluders; the nearest hit wins. Hits receive Gaussian range noise, then Bernoulli
/// dropout, and are rounded to float precision. Each (frame, RSU) pair draws from its own
/// random stream seeded by (seed, frame, RSU), so output does not depend on `threads`.
SimOutput simulate(const SimConfig & cfg, int threads = 1);

/// Named presets used by tests and the acceptance suite.
///   empty              ground only
///   static_car         one parked car, one RSU
///   moving_car         one car at 10 m/s, one RSU
///   two_rsu_car        parked car between two RSUs that see opposite faces
///   crossing_pair      two cars on perpendicular paths that never overlap, two RSUs
///   sparse_bus         far bus sampled coarsely: point gaps exceed the default DBSCAN eps
///   adjacent_buses     two sparse buses parked 0.5 m apart
///   partial_visibility car driving out from behind a wall
std::map<std::string, SimConfig> fixture_library();

/// Preset by name; throws ConfigError for unknown names.
SimConfig fixture(const std::string & name);

/// Random intersection with `vehicles` cars (>= 1): moving traffic on the east-west road,
/// parked and queued cars elsewhere, two RSUs, sparse sampling with dropout.
SimConfig intersection_scene(std::uint64_t seed, int vehicles = 8, int frames = 20);

/// Partial-visibility preset with randomized speed, lane offset and car size.
SimConfig partial_visibility_scene(std::uint64_t seed);

}  // namespace rsulabel

#endif  // RSULABEL__SIMULATOR_HPP_
