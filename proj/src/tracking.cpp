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

#include "rsulabel/tracking.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rsulabel/error.hpp"
#include "rsulabel/registration.hpp"

namespace rsulabel
{

namespace
{

using ObservationMatrix = Eigen::Matrix<double, 7, 9>;

ObservationMatrix observation()
{
  ObservationMatrix h = ObservationMatrix::Zero();
  h.leftCols<7>().setIdentity();
  return h;
}

// Wraps into (-pi/2, pi/2].
double wrap_half_turn(double a)
{
  a = normalize_angle(a);
  if (a > std::numbers::pi / 2.0) {
    a -= std::numbers::pi;
  } else if (a <= -std::numbers::pi / 2.0) {
    a += std::numbers::pi;
  }
  return a;
}

}  // namespace

StateCovariance KalmanParams::process_noise() const
{
  StateVector d;
  d << q_position, q_position, q_position, q_yaw, q_dims, q_dims, q_dims, q_velocity, q_velocity;
  return d.asDiagonal();
}

MeasurementCovariance KalmanParams::measurement_noise() const
{
  MeasurementVector d;
  d << r_position, r_position, r_position, r_yaw, r_dims, r_dims, r_dims;
  return d.asDiagonal();
}

BoundingBox TrackState::box() const
{
  BoundingBox b;
  b.cx = x(kCx);
  b.cy = x(kCy);
  b.cz = x(kCz);
  b.theta = normalize_angle(x(kTheta));
  b.l = x(kL);
  b.w = x(kW);
  b.h = x(kH);
  b.vx = x(kVx);
  b.vy = x(kVy);
  return b;
}

TrackState TrackState::from_detection(const BoundingBox & box, int track_id, const KalmanParams & params)
{
  TrackState s;
  s.x << box.cx, box.cy, box.cz, normalize_angle(box.theta), box.l, box.w, box.h, 0.0, 0.0;
  s.p.setZero();
  s.p.topLeftCorner<7, 7>() = params.measurement_noise();
  s.p(kVx, kVx) = params.initial_velocity_var;
  s.p(kVy, kVy) = params.initial_velocity_var;
  s.hit_count = 1;
  s.track_id = track_id;
  return s;
}

TrackState kf_predict(const TrackState & s, double dt, const KalmanParams & params)
{
  if (!(dt > 0.0)) {
    throw ParameterError("kf_predict: dt must be positive");
  }
  StateCovariance f = StateCovariance::Identity();
  f(kCx, kVx) = dt;
  f(kCy, kVy) = dt;
  TrackState out = s;
  out.x = f * s.x;
  out.p = f * s.p * f.transpose() + params.process_noise();
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  return out;
}

MeasurementVector align_measurement(const StateVector & x, const BoundingBox & z)
{
  const double yaw = x(kTheta);
  const double d0 = wrap_half_turn(z.theta - yaw);
  const double d1 = wrap_half_turn(z.theta + std::numbers::pi / 2.0 - yaw);
  MeasurementVector m;
  if (std::abs(d1) < std::abs(d0)) {
    m << z.cx, z.cy, z.cz, yaw + d1, z.w, z.l, z.h;
  } else {
    m << z.cx, z.cy, z.cz, yaw + d0, z.l, z.w, z.h;
  }
  return m;
}

TrackState kf_update(const TrackState & s, const BoundingBox & z, const KalmanParams & params)
{
  const ObservationMatrix h = observation();
  const MeasurementVector meas = align_measurement(s.x, z);
  const MeasurementVector innovation = meas - h * s.x;
  const MeasurementCovariance innov_cov = h * s.p * h.transpose() + params.measurement_noise();
  const Eigen::Matrix<double, 9, 7> gain = s.p * h.transpose() * innov_cov.inverse();

  TrackState out = s;
  out.x = s.x + gain * innovation;
  out.p = (StateCovariance::Identity() - gain * h) * s.p;
  out.p = 0.5 * (out.p + out.p.transpose()).eval();
  out.x(kTheta) = normalize_angle(out.x(kTheta));
  for (int i : {kL, kW, kH}) {
    out.x(i) = std::max(out.x(i), params.min_dim);
  }
  out.hit_count = s.hit_count + 1;
  out.miss_count = 0;
  return out;
}

AssociationResult associate(
  std::span<const BoundingBox> predicted, std::span<const BoundingBox> detections, double iou_gate)
{
  if (!(iou_gate > 0.0 && iou_gate < 1.0)) {
    throw ParameterError("associate: iou_gate must lie in (0, 1)");
  }
  AssociationResult out;
  // Gated-out pairs cost more than any full set of admissible pairs.
  const double invalid = static_cast<double>(std::min(predicted.size(), detections.size())) + 1.0;
  CostMatrix cost(static_cast<Eigen::Index>(predicted.size()), static_cast<Eigen::Index>(detections.size()));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double iou = bev_iou(predicted[i], detections[j]);
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = iou >= iou_gate ? 1.0 - iou : invalid;
    }
  }
  const Assignment a = hungarian(cost, 1.0);
  std::vector<char> det_used(detections.size(), 0);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int j = a.row_to_col[i];
    if (j == Assignment::kUnassigned) {
      out.unmatched_predictions.push_back(i);
    } else {
      out.matches.emplace_back(i, static_cast<std::size_t>(j));
      det_used[static_cast<std::size_t>(j)] = 1;
    }
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_used[j]) {
      out.unmatched_detections.push_back(j);
    }
  }
  return out;
}

namespace
{

struct ActiveTrack
{
  TrackState state;
  Tracklet tracklet;
  double last_time = 0.0;
};

TrackletInstance make_instance(const TrackingFrame & frame, const BoundingBox & det, const TrackState & state, double margin)
{
  TrackletInstance inst;
  inst.timestep = frame.timestep;
  inst.timestamp = frame.timestamp;
  inst.box = det;
  inst.box.vx = state.x(kVx);
  inst.box.vy = state.x(kVy);
  inst.points = points_in_box(frame.cloud, det, margin);
  return inst;
}

}  // namespace

std::vector<Tracklet> track_sequence(std::span<const TrackingFrame> frames, const TrackingConfig & cfg)
{
  std::vector<ActiveTrack> active;
  std::vector<ActiveTrack> finished;
  int next_id = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const TrackingFrame & frame = frames[f];
    if (f > 0 && !(frame.timestamp > frames[f - 1].timestamp && frame.timestep > frames[f - 1].timestep)) {
      throw ParameterError("track_sequence: frames must be strictly time-ordered");
    }
    std::vector<BoundingBox> predicted;
    predicted.reserve(active.size());
    for (auto & t : active) {
      t.state = kf_predict(t.state, frame.timestamp - t.last_time, cfg.kalman);
      t.last_time = frame.timestamp;
      predicted.push_back(t.state.box());
    }

    const AssociationResult assoc = associate(predicted, frame.detections, cfg.iou_gate);
    for (const auto & [ti, di] : assoc.matches) {
      ActiveTrack & t = active[ti];
      t.state = kf_update(t.state, frame.detections[di], cfg.kalman);
      t.tracklet.instances.push_back(make_instance(frame, frame.detections[di], t.state, cfg.member_margin));
    }
    for (std::size_t ti : assoc.unmatched_predictions) {
      ++active[ti].state.miss_count;
    }
    for (std::size_t di : assoc.unmatched_detections) {
      ActiveTrack t;
      t.state = TrackState::from_detection(frame.detections[di], next_id, cfg.kalman);
      t.tracklet.track_id = next_id;
      t.last_time = frame.timestamp;
      t.tracklet.instances.push_back(make_instance(frame, frame.detections[di], t.state, cfg.member_margin));
      ++next_id;
      active.push_back(std::move(t));
    }

    std::vector<ActiveTrack> still;
    for (auto & t : active) {
      (t.state.miss_count > cfg.max_miss ? finished : still).push_back(std::move(t));
    }
    active = std::move(still);
  }
  for (auto & t : active) {
    finished.push_back(std::move(t));
  }

  std::vector<Tracklet> out;
  for (auto & t : finished) {
    if (t.state.hit_count >= cfg.min_hits) {
      out.push_back(std::move(t.tracklet));
    }
  }
  std::sort(out.begin(), out.end(), [](const Tracklet & a, const Tracklet & b) { return a.track_id < b.track_id; });
  return out;
}

std::vector<Tracklet> filter_short_tracklets(std::span<const Tracklet> tracklets, std::size_t min_instances)
{
  if (min_instances < 1) {
    throw ParameterError("filter_short_tracklets: min_instances must be at least 1");
  }
  std::vector<Tracklet> out;
  std::copy_if(tracklets.begin(), tracklets.end(), std::back_inserter(out), [&](const Tracklet & t) {
    return t.instances.size() >= min_instances;
  });
  return out;
}

}  // namespace rsulabel
