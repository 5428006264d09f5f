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
/// \brief Sequence datasets and the file-to-file stages behind the command-line tool.
#ifndef RSULABEL__PIPELINE_HPP_
#define RSULABEL__PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rsulabel/config.hpp"
#include "rsulabel/evaluation.hpp"
#include "rsulabel/io.hpp"
#include "rsulabel/simulator.hpp"

namespace rsulabel
{

struct SequenceFrame
{
  int timestep = 0;
  double timestamp = 0.0;
  /// One cloud per RSU, tagged with the RSU id.
  std::vector<PointCloud> clouds;
};

struct Sequence
{
  std::string sequence_id;
  std::vector<RsuInfo> rsus;
  std::vector<SequenceFrame> frames;
  std::optional<LabelFile> ground_truth;
};

/// Ground truth is stored with stage ground_truth and the vehicle index as track id.
Sequence sequence_from_simulation(const SimConfig & cfg, const SimOutput & out, const std::string & sequence_id);

/// Writes manifest.json, clouds/<timestep>_rsu<id>.bin and ground_truth.labels under `dir`.
/// Returns the manifest path.
std::filesystem::path save_sequence(const Sequence & seq, const std::filesystem::path & dir);
Sequence load_sequence(const std::filesystem::path & manifest_path);

/// Current merged cloud of frame `index` plus up to k other frames, nearest in time first
/// (earlier before later on ties).
FrameBundle make_bundle(const Sequence & seq, std::size_t index, std::size_t k);

/// Ground-removal seed of one timestep.
std::uint64_t frame_seed(const PipelineConfig & cfg, int timestep);

/// Merged current cloud of frame `index`, cropped and without ground. Member points of
/// tracklet instances come from this cloud.
PointCloud member_cloud(const Sequence & seq, std::size_t index, const PipelineConfig & cfg);

LabelFile run_discover(const Sequence & seq, const PipelineConfig & cfg, std::vector<std::string> * warnings = nullptr);

/// Tracks discovered boxes, drops tracklets shorter than min_instances and labels the rest
/// with their track ids.
LabelFile run_track(const Sequence & seq, const LabelFile & discovered, const PipelineConfig & cfg);

/// Tracklets rebuilt from track ids of `tracked`, refined independently.
std::vector<Tracklet> tracklets_from_labels(const Sequence & seq, const LabelFile & tracked, const PipelineConfig & cfg);
LabelFile run_refine(const Sequence & seq, const LabelFile & tracked, const PipelineConfig & cfg);

/// Compares against ground truth whose footprint lies inside the detection range. Throws
/// ConfigError when the sequence ids differ and ParameterError when `dets` has a timestep
/// the ground truth lacks.
EvalReport run_eval(const LabelFile & dets, const LabelFile & gt, const PipelineConfig & cfg);

std::string format_report_json(const EvalReport & report, const std::string & sequence_id, double iou_thresh);
std::string format_report_table(const EvalReport & report);

inline constexpr double kMovingFlow = 0.1;

struct FlowStats
{
  std::size_t source_points = 0;
  std::size_t target_points = 0;
  std::size_t source_clusters = 0;
  std::size_t target_clusters = 0;
  std::size_t matched_clusters = 0;
  /// Points displaced by more than kMovingFlow.
  std::size_t moving_points = 0;
  double mean_magnitude = 0.0;
  double max_magnitude = 0.0;
};

/// Scene flow from frame `from` to frame `to` (indices), ground removed first.
FlowStats run_flow(const Sequence & seq, std::size_t from, std::size_t to, const PipelineConfig & cfg);
std::string format_flow_json(const FlowStats & stats);

struct PipelineResult
{
  LabelFile discovered;
  LabelFile tracked;
  LabelFile refined;
  std::optional<EvalReport> report;
};

/// discover, track, refine and (with ground truth) eval. Each stage output goes through
/// its text form before the next stage reads it. With a non-empty `out_dir` the files
/// discovered.labels, tracked.labels, refined.labels and report.json are written there.
PipelineResult run_pipeline(const Sequence & seq, const PipelineConfig & cfg, const std::filesystem::path & out_dir = {});

}  // namespace rsulabel

#endif  // RSULABEL__PIPELINE_HPP_
