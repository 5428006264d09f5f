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

#include "rsulabel/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "rsulabel/error.hpp"
#include "rsulabel/parallel.hpp"

namespace rsulabel
{

namespace
{

constexpr double kDeg = std::numbers::pi / 180.0;

struct Solid
{
  RigidTransform world_to_body;
  Vec3 half;
  int label;
};

// Entry distance of the ray o + t d into the box, if any.
std::optional<double> ray_box(const Solid & s, const Vec3 & o, const Vec3 & d)
{
  const Vec3 ob = s.world_to_body * o;
  const Vec3 db = s.world_to_body.rotation() * d;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(db[a]) < 1e-15) {
      if (std::abs(ob[a]) > s.half[a]) {
        return std::nullopt;
      }
      continue;
    }
    double t1 = (-s.half[a] - ob[a]) / db[a];
    double t2 = (s.half[a] - ob[a]) / db[a];
    if (t1 > t2) {
      std::swap(t1, t2);
    }
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
    if (t_enter > t_exit) {
      return std::nullopt;
    }
  }
  if (t_exit <= 0.0 || t_enter <= 0.0) {
    return std::nullopt;
  }
  return t_enter;
}

Solid make_solid(const BoundingBox & b, int label)
{
  return {box_to_transform(b).inverse(), Vec3(b.l / 2.0, b.w / 2.0, b.h / 2.0), label};
}

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

std::optional<BoundingBox> vehicle_box(const VehicleSpec & v, int frame, double frame_dt)
{
  if (frame < v.spawn_frame || (v.despawn_frame >= 0 && frame >= v.despawn_frame) || v.waypoints.empty()) {
    return std::nullopt;
  }
  BoundingBox b;
  b.l = v.l;
  b.w = v.w;
  b.h = v.h;
  b.cz = v.h / 2.0;
  b.theta = normalize_angle(v.yaw);
  const auto & wp = v.waypoints;
  auto heading = [&](std::size_t k) {
    const Vec2 d = wp[k + 1].position - wp[k].position;
    return d.norm() < 1e-9 ? normalize_angle(v.yaw) : std::atan2(d.y(), d.x());
  };
  if (wp.size() == 1) {
    b.cx = wp[0].position.x();
    b.cy = wp[0].position.y();
    return b;
  }
  if (frame <= wp.front().frame) {
    b.cx = wp.front().position.x();
    b.cy = wp.front().position.y();
    b.theta = heading(0);
    if (frame < wp.front().frame) {
      return b;
    }
  }
  if (frame >= wp.back().frame) {
    b.cx = wp.back().position.x();
    b.cy = wp.back().position.y();
    b.theta = heading(wp.size() - 2);
    if (frame == wp.back().frame) {
      const auto & a = wp[wp.size() - 2];
      const Vec2 vel = (wp.back().position - a.position) / (static_cast<double>(wp.back().frame - a.frame) * frame_dt);
      b.vx = vel.x();
      b.vy = vel.y();
    }
    return b;
  }
  for (std::size_t k = 0; k + 1 < wp.size(); ++k) {
    if (frame >= wp[k].frame && frame < wp[k + 1].frame) {
      const double span = static_cast<double>(wp[k + 1].frame - wp[k].frame);
      const double a = static_cast<double>(frame - wp[k].frame) / span;
      const Vec2 p = wp[k].position + a * (wp[k + 1].position - wp[k].position);
      const Vec2 vel = (wp[k + 1].position - wp[k].position) / (span * frame_dt);
      b.cx = p.x();
      b.cy = p.y();
      b.vx = vel.x();
      b.vy = vel.y();
      b.theta = heading(k);
      break;
    }
  }
  return b;
}

void SimConfig::validate() const
{
  if (frames < 1 || !(frame_dt > 0.0)) {
    throw ConfigError("simulation needs frames >= 1 and frame_dt > 0");
  }
  if (rsus.empty()) {
    throw ConfigError("simulation needs at least one RSU");
  }
  for (const auto & r : rsus) {
    if (!(r.position.z() > 0.0) || !r.position.allFinite()) {
      throw ConfigError("RSU heights must be positive");
    }
  }
  const auto & s = sampling;
  if (!(s.azimuth_res_deg > 0.0 && s.elevation_res_deg > 0.0) || !(s.elevation_min_deg < s.elevation_max_deg) ||
      s.elevation_min_deg < -90.0 || s.elevation_max_deg > 90.0 || s.range_noise < 0.0 || !(s.max_range > 0.0))
  {
    throw ConfigError("invalid sampling parameters");
  }
  for (double d : {vehicle_dropout, ground_dropout, occluder_dropout}) {
    if (!(d >= 0.0 && d < 1.0)) {
      throw ConfigError("dropout rates must lie in [0, 1)");
    }
  }
  for (const auto & v : vehicles) {
    if (!(v.l > 0.0 && v.w > 0.0 && v.h > 0.0) || v.waypoints.empty()) {
      throw ConfigError("vehicles need positive dimensions and at least one waypoint");
    }
    for (std::size_t k = 1; k < v.waypoints.size(); ++k) {
      if (v.waypoints[k].frame <= v.waypoints[k - 1].frame) {
        throw ConfigError("waypoint frames must be strictly increasing");
      }
    }
    if (v.despawn_frame >= 0 && v.despawn_frame <= v.spawn_frame) {
      throw ConfigError("despawn frame must follow the spawn frame");
    }
  }
  for (const auto & o : occluders) {
    if (!o.valid()) {
      throw ConfigError("occluders need positive dimensions");
    }
  }
  for (int f = 0; f < frames; ++f) {
    std::vector<std::pair<std::size_t, BoundingBox>> present;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      if (auto b = vehicle_box(vehicles[i], f, frame_dt)) {
        present.emplace_back(i, *b);
      }
    }
    for (std::size_t a = 0; a < present.size(); ++a) {
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        if (bev_intersection_area(present[a].second, present[b].second) > 1e-9) {
          throw ConfigError(
            "vehicles " + std::to_string(present[a].first) + " and " + std::to_string(present[b].first) +
            " overlap at frame " + std::to_string(f));
        }
      }
      for (const auto & o : occluders) {
        if (bev_intersection_area(present[a].second, o) > 1e-9) {
          throw ConfigError("vehicle " + std::to_string(present[a].first) + " overlaps an occluder");
        }
      }
    }
  }
}

SimOutput simulate(const SimConfig & cfg, int threads)
{
  cfg.validate();
  SimOutput out;
  out.frames.resize(static_cast<std::size_t>(cfg.frames));
  const auto & smp = cfg.sampling;
  const auto n_az = static_cast<int>(std::floor(360.0 / smp.azimuth_res_deg + 1e-9));
  const auto n_el =
    static_cast<int>(std::floor((smp.elevation_max_deg - smp.elevation_min_deg) / smp.elevation_res_deg + 1e-9)) + 1;

  parallel_for(out.frames.size(), threads, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    SimFrame & frame = out.frames[fi];
    frame.index = f;
    frame.timestamp = f * cfg.frame_dt;

    std::vector<Solid> solids;
    for (std::size_t i = 0; i < cfg.vehicles.size(); ++i) {
      if (auto b = vehicle_box(cfg.vehicles[i], f, cfg.frame_dt)) {
        frame.ground_truth.push_back(*b);
        frame.ground_truth_ids.push_back(static_cast<int>(i));
        solids.push_back(make_solid(*b, static_cast<int>(i)));
      }
    }
    for (const auto & o : cfg.occluders) {
      solids.push_back(make_solid(o, SimFrame::kOccluder));
    }

    for (std::size_t r = 0; r < cfg.rsus.size(); ++r) {
      const RsuPose & rsu = cfg.rsus[r];
      std::seed_seq seq{
        static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(f),
        static_cast<std::uint32_t>(r)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);

      PointCloud cloud;
      cloud.timestamp = frame.timestamp;
      std::vector<int> labels;
      const Vec3 & o = rsu.position;
      for (int ia = 0; ia < n_az; ++ia) {
        const double az = ia * smp.azimuth_res_deg * kDeg;
        for (int ie = 0; ie < n_el; ++ie) {
          const double el = (smp.elevation_min_deg + ie * smp.elevation_res_deg) * kDeg;
          const Vec3 d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
          double best_t = smp.max_range;
          int best_label = std::numeric_limits<int>::min();
          if (d.z() < 0.0) {
            const double t = -o.z() / d.z();
            const Vec3 p = o + t * d;
            if (t <= best_t && std::abs(p.x()) <= cfg.ground_extent && std::abs(p.y()) <= cfg.ground_extent) {
              best_t = t;
              best_label = SimFrame::kGround;
            }
          }
          for (const auto & s : solids) {
            if (auto t = ray_box(s, o, d); t && *t <= best_t) {
              best_t = *t;
              best_label = s.label;
            }
          }
          if (best_label == std::numeric_limits<int>::min()) {
            continue;
          }
          const double range = best_t + smp.range_noise * noise(rng);
          const double dropout = best_label >= 0 ? cfg.vehicle_dropout
                                 : best_label == SimFrame::kGround ? cfg.ground_dropout
                                                                   : cfg.occluder_dropout;
          if (unit(rng) < dropout) {
            continue;
          }
          const Vec3 p = o + range * d;
          cloud.push_back(Vec3(round_to_float(p.x()), round_to_float(p.y()), round_to_float(p.z())), rsu.sensor_id);
          labels.push_back(best_label);
        }
      }
      frame.clouds.push_back(std::move(cloud));
      frame.point_labels.push_back(std::move(labels));
    }
  });
  return out;
}

namespace
{

VehicleSpec parked(Vec2 pos, double yaw, double l = 4.5, double w = 1.9, double h = 1.6)
{
  VehicleSpec v;
  v.l = l;
  v.w = w;
  v.h = h;
  v.yaw = yaw;
  v.waypoints = {{0, pos}};
  return v;
}

VehicleSpec driving(Vec2 from, Vec2 to, int last_frame, double l = 4.5, double w = 1.9, double h = 1.6)
{
  VehicleSpec v;
  v.l = l;
  v.w = w;
  v.h = h;
  v.yaw = std::atan2(to.y() - from.y(), to.x() - from.x());
  v.waypoints = {{0, from}, {last_frame, to}};
  return v;
}

SamplingParams sparse_sampling()
{
  SamplingParams s;
  s.azimuth_res_deg = 3.0;
  s.elevation_res_deg = 0.9;
  s.elevation_min_deg = -40.0;
  s.elevation_max_deg = -2.0;
  return s;
}

}  // namespace

SimConfig partial_visibility_scene(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SimConfig c;
  c.seed = seed;
  c.frames = 20;
  c.rsus = {RsuPose{0, Vec3(0.0, 0.0, 6.0)}};
  // The car crosses the opening between two walls: it emerges front first and leaves rear last.
  const double gap = 8.0;
  for (double side : {-1.0, 1.0}) {
    BoundingBox wall;
    wall.cx = side * (gap / 2.0 + 8.0);
    wall.cy = 7.0;
    wall.cz = 2.25;
    wall.l = 16.0;
    wall.w = 0.3;
    wall.h = 4.5;
    c.occluders.push_back(wall);
  }
  const double lane = 9.0 + 0.5 * u(rng);
  const double l = 4.4 + 0.4 * u(rng);
  const double w = 1.75 + 0.2 * u(rng);
  const double h = 1.45 + 0.25 * u(rng);
  const double x0 = -9.0 + 0.6 * u(rng);
  const double x1 = 9.0 - 0.6 * u(rng);
  c.vehicles = {driving({x0, lane}, {x1, lane}, c.frames - 1, l, w, h)};
  return c;
}

std::map<std::string, SimConfig> fixture_library()
{
  std::map<std::string, SimConfig> lib;

  SimConfig empty;
  empty.frames = 3;
  lib["empty"] = empty;

  SimConfig static_car;
  static_car.frames = 10;
  static_car.vehicles = {parked({12.0, 6.0}, 0.35)};
  lib["static_car"] = static_car;

  SimConfig moving_car;
  moving_car.frames = 20;
  moving_car.vehicles = {driving({-15.0, -4.0}, {4.0, -4.0}, 19)};
  lib["moving_car"] = moving_car;

  SimConfig two_rsu;
  two_rsu.frames = 3;
  two_rsu.rsus = {RsuPose{0, Vec3(-15.0, 0.0, 5.0)}, RsuPose{1, Vec3(15.0, 0.0, 5.0)}};
  two_rsu.vehicles = {parked({0.0, 0.0}, 0.0)};
  lib["two_rsu_car"] = two_rsu;

  SimConfig crossing;
  crossing.frames = 20;
  crossing.rsus = {RsuPose{0, Vec3(0.0, 0.0, 6.0)}, RsuPose{1, Vec3(20.0, 15.0, 6.0)}};
  crossing.vehicles = {
    driving({-25.0, -3.0}, {-25.0 + 1.5 * 19, -3.0}, 19),
    driving({8.0, 25.0}, {8.0, 25.0 - 1.5 * 19}, 19),
  };
  lib["crossing_pair"] = crossing;

  // Broadside bus 20 m from a 10 m pole: about 1 m between neighbouring returns.
  SimConfig bus;
  bus.frames = 6;
  bus.rsus = {RsuPose{0, Vec3(0.0, 0.0, 10.0)}};
  bus.sampling = sparse_sampling();
  bus.vehicles = {parked({0.0, 21.25}, 0.0, 12.0, 2.5, 3.0)};
  lib["sparse_bus"] = bus;

  SimConfig buses = bus;
  buses.vehicles = {
    parked({0.0, 21.25}, 0.0, 12.0, 2.5, 3.0),
    parked({0.0, 21.25 + 2.5 + 0.5}, 0.0, 12.0, 2.5, 3.0),
  };
  lib["adjacent_buses"] = buses;

  lib["partial_visibility"] = partial_visibility_scene(0);
  return lib;
}

SimConfig fixture(const std::string & name)
{
  auto lib = fixture_library();
  auto it = lib.find(name);
  if (it == lib.end()) {
    throw ConfigError("unknown simulator preset '" + name + "'");
  }
  return it->second;
}

SimConfig intersection_scene(std::uint64_t seed, int vehicles, int frames)
{
  if (vehicles < 1 || frames < 1) {
    throw ConfigError("intersection scene needs at least one vehicle and one frame");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SimConfig c;
  c.seed = seed;
  c.frames = frames;
  c.rsus = {RsuPose{0, Vec3(-10.0, -10.0, 6.0)}, RsuPose{1, Vec3(10.0, 10.0, 6.0)}};
  c.sampling.azimuth_res_deg = 0.8;
  c.sampling.elevation_res_deg = 0.8;
  c.vehicle_dropout = 0.5;

  auto dims = [&]() {
    if (u(rng) < 0.2) {
      return Vec3(6.0 + 2.0 * u(rng), 2.2 + 0.3 * u(rng), 2.5 + 0.7 * u(rng));
    }
    return Vec3(4.0 + 1.0 * u(rng), 1.7 + 0.3 * u(rng), 1.4 + 0.4 * u(rng));
  };

  // Parking slots along both sides of the east-west road and queue slots on the
  // north-south road; moving traffic only on the east-west lanes.
  std::vector<std::pair<Vec2, double>> slots;
  for (double x : {-30.0, -21.0, -12.0, 12.0, 21.0, 30.0}) {
    slots.push_back({{x, 8.0}, 0.0});
    slots.push_back({{x, -8.0}, 0.0});
  }
  for (double y : {14.0, 23.0}) {
    slots.push_back({{1.75, y}, std::numbers::pi / 2.0});
    slots.push_back({{-1.75, -y}, std::numbers::pi / 2.0});
  }
  std::shuffle(slots.begin(), slots.end(), rng);

  const int moving = std::min(vehicles, 1 + static_cast<int>(u(rng) * 3.0));
  const double speed_east = 0.6 + 0.5 * u(rng);
  const double speed_west = 0.6 + 0.5 * u(rng);
  int east = 0, west = 0;
  for (int i = 0; i < moving; ++i) {
    const Vec3 d = dims();
    const bool eastbound = (i % 2) == 0;
    const double speed = eastbound ? speed_east : speed_west;
    const int k = eastbound ? east++ : west++;
    const double travel = speed * (frames - 1);
    const double start = -travel / 2.0 - 14.0 * k - 4.0 * u(rng);
    if (eastbound) {
      c.vehicles.push_back(driving({start, -1.75}, {start + travel, -1.75}, frames - 1, d.x(), d.y(), d.z()));
    } else {
      c.vehicles.push_back(driving({-start, 1.75}, {-start - travel, 1.75}, frames - 1, d.x(), d.y(), d.z()));
    }
  }
  for (int i = moving; i < vehicles; ++i) {
    const auto & [pos, yaw] = slots[static_cast<std::size_t>(i - moving) % slots.size()];
    const Vec3 d = dims();
    c.vehicles.push_back(parked(pos, yaw, d.x(), d.y(), d.z()));
  }
  return c;
}

}  // namespace rsulabel
