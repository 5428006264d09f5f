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
/// \brief Track-by-detection with a constant-velocity Kalman filter.
#ifndef RSULABEL__TRACKING_HPP_
#define RSULABEL__TRACKING_HPP_

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

using StateVector = Eigen::Matrix<double, 9, 1>;
using StateCovariance = Eigen::Matrix<double, 9, 9>;
using MeasurementVector = Eigen::Matrix<double, 7, 1>;
using MeasurementCovariance = Eigen::Matrix<double, 7, 7>;

/// State layout.
enum StateIndex : int { kCx = 0, kCy, kCz, kTheta, kL, kW, kH, kVx, kVy };

struct KalmanParams
{
  double q_position = 0.5;
  double q_yaw = 0.1;
  double q_dims = 0.05;
  double q_velocity = 1.0;
  double r_position = 0.5;
  double r_yaw = 0.1;
  double r_dims = 0.05;
  double initial_velocity_var = 100.0;
  /// Floor applied to l, w, h after an update.
  double min_dim = 1e-3;

  StateCovariance process_noise() const;
  MeasurementCovariance measurement_noise() const;
};

struct TrackState
{
  StateVector x = StateVector::Zero();
  StateCovariance p = StateCovariance::Identity();
  int hit_count = 0;
  int miss_count = 0;
  int track_id = 0;

  /// Box with the state's pose, dimensions and planar velocity.
  BoundingBox box() const;

  /// New track from a detection: observed components from the box, zero velocity.
  static TrackState from_detection(const BoundingBox & box, int track_id, const KalmanParams & params = {});
};

/// Constant-velocity prediction: cx += vx dt, cy += vy dt; P <- F P F' + Q.
/// Throws ParameterError when dt <= 0.
TrackState kf_predict(const TrackState & s, double dt, const KalmanParams & params = {});

/// Measurement vector [cx, cy, cz, theta, l, w, h] of `z`, re-expressed to be closest to the
/// predicted state: the yaw innovation is wrapped into (-pi/2, pi/2] by a 180 deg flip, and a
/// box closer to the state after a quarter turn is rewritten with l and w swapped.
MeasurementVector align_measurement(const StateVector & x, const BoundingBox & z);

/// Kalman update with the aligned measurement; velocity is unobserved.
TrackState kf_update(const TrackState & s, const BoundingBox & z, const KalmanParams & params = {});

struct AssociationResult
{
  /// (prediction index, detection index) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_detections;
};

/// Hungarian assignment on 1 - BEV IoU; pairs with IoU below `iou_gate` are unmatched.
AssociationResult associate(
  std::span<const BoundingBox> predicted, std::span<const BoundingBox> detections, double iou_gate);

struct TrackletInstance
{
  int timestep = 0;
  double timestamp = 0.0;
  BoundingBox box;
  PointSet points;
};

struct Tracklet
{
  int track_id = 0;
  std::vector<TrackletInstance> instances;
};

struct TrackingConfig
{
  double iou_gate = 0.1;
  int max_miss = 2;
  int min_hits = 1;
  /// Margin used when collecting member points with points_in_box.
  double member_margin = 0.2;
  KalmanParams kalman;
};

/// Detections and ground-free cloud of one timestep.
struct TrackingFrame
{
  int timestep = 0;
  double timestamp = 0.0;
  std::vector<BoundingBox> detections;
  PointCloud cloud;
};

/// Runs predict / associate / update over time-ordered frames. Each matched or new track
/// appends an instance holding the detection box, the posterior planar velocity and the
/// cloud points inside the box. Tracks missing more than max_miss frames end. Output is
/// ordered by track id. Throws ParameterError when frames are not strictly time-ordered.
std::vector<Tracklet> track_sequence(std::span<const TrackingFrame> frames, const TrackingConfig & cfg = {});

std::vector<Tracklet> filter_short_tracklets(std::span<const Tracklet> tracklets, std::size_t min_instances);

}  // namespace rsulabel

#endif  // RSULABEL__TRACKING_HPP_
