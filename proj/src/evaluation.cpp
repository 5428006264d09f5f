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

#include "rsulabel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rsulabel/error.hpp"
#include "rsulabel/registration.hpp"

namespace rsulabel
{

FrameMatch match_frame(std::span<const BoundingBox> dets, std::span<const BoundingBox> gts, double iou_thresh)
{
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw ParameterError("match_frame: iou_thresh must lie in (0, 1)");
  }
  FrameMatch out;
  const auto nd = static_cast<Eigen::Index>(dets.size());
  const auto ng = static_cast<Eigen::Index>(gts.size());
  // Pairs below the threshold cost more than any complete set of valid pairs, so the solver
  // first maximises the number of valid pairs and then their summed IoU.
  const double invalid = static_cast<double>(std::min(dets.size(), gts.size())) + 1.0;
  Eigen::MatrixXd iou(nd, ng);
  CostMatrix cost(nd, ng);
  for (Eigen::Index i = 0; i < nd; ++i) {
    for (Eigen::Index j = 0; j < ng; ++j) {
      iou(i, j) = bev_iou(dets[static_cast<std::size_t>(i)], gts[static_cast<std::size_t>(j)]);
      cost(i, j) = iou(i, j) >= iou_thresh ? 1.0 - iou(i, j) : invalid;
    }
  }
  const Assignment a = hungarian(cost, 1.0);
  std::vector<char> gt_used(gts.size(), 0);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const int j = a.row_to_col[i];
    if (j == Assignment::kUnassigned) {
      out.unmatched_detections.push_back(i);
      continue;
    }
    out.pairs.emplace_back(i, static_cast<std::size_t>(j));
    out.ious.push_back(iou(static_cast<Eigen::Index>(i), j));
    gt_used[static_cast<std::size_t>(j)] = 1;
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (!gt_used[j]) {
      out.unmatched_ground_truth.push_back(j);
    }
  }
  return out;
}

TpErrors tp_errors(const BoundingBox & det, const BoundingBox & gt)
{
  TpErrors e;
  e.translation = std::hypot(det.cx - gt.cx, det.cy - gt.cy);
  const double inter = std::min(det.l, gt.l) * std::min(det.w, gt.w) * std::min(det.h, gt.h);
  const double uni = det.l * det.w * det.h + gt.l * gt.w * gt.h - inter;
  e.scale = uni > 0.0 ? std::clamp(1.0 - inter / uni, 0.0, 1.0) : 1.0;
  double d = std::fmod(std::abs(normalize_angle(det.theta - gt.theta)), std::numbers::pi);
  e.orientation = std::min(d, std::numbers::pi - d);
  e.velocity = std::hypot(det.vx - gt.vx, det.vy - gt.vy);
  return e;
}

EvalReport compute_report(
  std::span<const FrameBoxes> dets, std::span<const FrameBoxes> gts, double iou_thresh, bool with_velocity)
{
  if (dets.size() != gts.size()) {
    throw ParameterError("compute_report: detection and ground-truth frame counts differ");
  }
  EvalReport r;
  double ate = 0.0, ase = 0.0, aoe = 0.0, ave = 0.0;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    if (dets[f].timestep != gts[f].timestep) {
      throw ParameterError(
        "compute_report: timestep mismatch (" + std::to_string(dets[f].timestep) + " vs " +
        std::to_string(gts[f].timestep) + ")");
    }
    const FrameMatch m = match_frame(dets[f].boxes, gts[f].boxes, iou_thresh);
    FrameReport fr;
    fr.timestep = dets[f].timestep;
    fr.tp = m.pairs.size();
    fr.fp = m.unmatched_detections.size();
    fr.fn = m.unmatched_ground_truth.size();
    for (const auto & [di, gi] : m.pairs) {
      const TpErrors e = tp_errors(dets[f].boxes[di], gts[f].boxes[gi]);
      ate += e.translation;
      ase += e.scale;
      aoe += e.orientation;
      ave += e.velocity;
    }
    r.tp += fr.tp;
    r.fp += fr.fp;
    r.fn += fr.fn;
    r.frames.push_back(fr);
  }
  r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
  r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
  if (r.tp > 0) {
    const auto n = static_cast<double>(r.tp);
    r.ate = ate / n;
    r.ase = ase / n;
    r.aoe = aoe / n;
    if (with_velocity) {
      r.ave = ave / n;
    }
  } else if (with_velocity) {
    r.ave = 0.0;
  }
  return r;
}

}  // namespace rsulabel
