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
/// \brief Ground-truth matching, recall/precision and true-positive error metrics.
#ifndef RSULABEL__EVALUATION_HPP_
#define RSULABEL__EVALUATION_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

struct FrameMatch
{
  /// (detection index, ground-truth index) pairs, ordered by detection index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> ious;
  std::vector<std::size_t> unmatched_detections;
  std::vector<std::size_t> unmatched_ground_truth;
};

/// Optimal one-to-one matching on BEV IoU: maximises the number of pairs with
/// IoU >= iou_thresh, then their summed IoU. Detections carry no confidence.
FrameMatch match_frame(std::span<const BoundingBox> dets, std::span<const BoundingBox> gts, double iou_thresh);

struct TpErrors
{
  /// Plan-view center distance, meters.
  double translation = 0.0;
  /// 1 - 3D IoU of the two boxes after aligning centers and yaw.
  double scale = 0.0;
  /// Absolute yaw difference modulo pi, in [0, pi/2].
  double orientation = 0.0;
  /// Planar velocity difference norm.
  double velocity = 0.0;
};

TpErrors tp_errors(const BoundingBox & det, const BoundingBox & gt);

/// Boxes of one timestep.
struct FrameBoxes
{
  int timestep = 0;
  std::vector<BoundingBox> boxes;
};

struct FrameReport
{
  int timestep = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct EvalReport
{
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double recall = 0.0;
  double precision = 0.0;
  double ate = 0.0;
  double ase = 0.0;
  double aoe = 0.0;
  /// Mean velocity error; only filled when requested.
  std::optional<double> ave;
  std::vector<FrameReport> frames;
};

/// Aggregates match_frame over aligned frames. Throws ParameterError when the frame lists
/// differ in length or timesteps.
EvalReport compute_report(
  std::span<const FrameBoxes> dets, std::span<const FrameBoxes> gts, double iou_thresh,
  bool with_velocity = false);

}  // namespace rsulabel

#endif  // RSULABEL__EVALUATION_HPP_
