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
/// \brief Tracklet refinement: canonical object reconstruction, shared dimensions and
/// per-instance pose re-estimation.
#ifndef RSULABEL__REFINEMENT_HPP_
#define RSULABEL__REFINEMENT_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rsulabel/geometry.hpp"
#include "rsulabel/registration.hpp"
#include "rsulabel/tracking.hpp"

namespace rsulabel
{

struct RefinementParams
{
  IcpParams icp{50, 0.5, 1e-6};
  /// Instances with fewer member points take no part in the reconstruction.
  std::size_t min_points = 3;
  /// Try quarter-turn and extent-aligned initial guesses before each ICP run.
  bool multi_hypothesis = true;
  /// Gate used to score competing initial guesses.
  double score_dist = 0.25;
  /// Source points used while scoring initial guesses.
  std::size_t hypothesis_points = 150;
  int hypothesis_iters = 15;
  /// Guesses whose inlier fraction is within this margin of the best one count as tied;
  /// ties go to the guess closest to the heading prior.
  double hypothesis_tolerance = 0.05;
  /// Neighbouring instances on each side that vote on the heading prior.
  std::size_t heading_window = 5;
  LShapeParams lshape;
};

/// World points of one instance and their aligned coordinates in the object frame.
struct InstanceCorrespondence
{
  std::size_t instance = 0;
  PointSet world;
  PointSet body;
};

struct CanonicalObject
{
  /// Aggregated points in the object frame.
  PointSet points;
  /// Instance whose body frame defines the object frame.
  std::size_t reference = 0;
  std::vector<InstanceCorrespondence> correspondences;
  double l = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// Maps world points into the body frame of `instance`.
PointSet to_body_frame(const BoundingBox & instance, std::span<const Vec3> world_pts);

/// Seeds the object with the body-frame points of the instance with most points (earliest on
/// ties) and registers every other usable instance onto the growing set, largest first.
/// Returns nullopt when no instance has at least `min_points` points.
std::optional<CanonicalObject> aggregate_object(const Tracklet & tracklet, const RefinementParams & params = {});

/// Fits a box to the aggregated points, stores its dimensions in `obj` and re-expresses all
/// object-frame coordinates relative to that box. Returns the fitted box (object frame,
/// before re-centering) or nullopt when the points are degenerate.
std::optional<BoundingBox> refine_dimension(CanonicalObject & obj, const LShapeParams & params = {});

struct PoseEstimate
{
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double theta = 0.0;

  RigidTransform transform() const { return RigidTransform::from_yaw(theta, Vec3(cx, cy, cz)); }
};

/// Yaw + translation minimising sum |T^-1 world_i - body_i|^2 in closed form (planar Kabsch
/// on x/y, mean offset on z). Throws DegenerateInputError when the body points coincide in
/// plan view, ParameterError on length mismatch or empty input.
PoseEstimate refine_pose(std::span<const Vec3> world, std::span<const Vec3> body);

/// Sum of squared residuals |T^-1 world_i - body_i|^2.
double pose_objective(const RigidTransform & t, std::span<const Vec3> world, std::span<const Vec3> body);

struct RefinedTracklet
{
  Tracklet tracklet;
  bool refined = false;
  std::string note;
};

/// Full refinement. Every instance gets the shared dimensions; instances that took part in
/// the reconstruction also get a re-solved pose. Velocities come from finite differences of
/// the refined centers. Degenerate tracklets come back unchanged with refined = false.
RefinedTracklet refine_tracklet(const Tracklet & tracklet, const RefinementParams & params = {});

}  // namespace rsulabel

#endif  // RSULABEL__REFINEMENT_HPP_
