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

#include "rsulabel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <nlohmann/json.hpp>

#include "rsulabel/discovery.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/parallel.hpp"
#include "rsulabel/refinement.hpp"
#include "rsulabel/registration.hpp"
#include "rsulabel/tracking.hpp"

namespace rsulabel
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

PointCloud merged(const SequenceFrame & f)
{
  if (f.clouds.empty()) {
    PointCloud c;
    c.timestamp = f.timestamp;
    return c;
  }
  return merge_rsu_clouds(f.clouds);
}

LabelFile empty_labels(const Sequence & seq)
{
  LabelFile out;
  out.sequence_id = seq.sequence_id;
  for (const auto & f : seq.frames) {
    out.frames.push_back({f.timestep, f.timestamp, {}});
  }
  return out;
}

std::size_t frame_index(const Sequence & seq, int timestep)
{
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    if (seq.frames[i].timestep == timestep) {
      return i;
    }
  }
  throw ConfigError("labels reference timestep " + std::to_string(timestep) + " missing from the sequence");
}

void check_sequence(const Sequence & seq, const LabelFile & labels)
{
  if (labels.sequence_id != seq.sequence_id) {
    throw ConfigError(
      "label sequence '" + labels.sequence_id + "' does not match dataset sequence '" + seq.sequence_id + "'");
  }
}

LabelFile round_trip(const LabelFile & labels) { return parse_labels(format_labels(labels)); }

}  // namespace

Sequence sequence_from_simulation(const SimConfig & cfg, const SimOutput & out, const std::string & sequence_id)
{
  Sequence seq;
  seq.sequence_id = sequence_id;
  for (const auto & r : cfg.rsus) {
    seq.rsus.push_back({r.sensor_id, r.position});
  }
  LabelFile gt;
  gt.sequence_id = sequence_id;
  for (const auto & f : out.frames) {
    SequenceFrame sf;
    sf.timestep = f.index;
    sf.timestamp = f.timestamp;
    sf.clouds = f.clouds;
    seq.frames.push_back(std::move(sf));
    LabelFrame lf{f.index, f.timestamp, {}};
    for (std::size_t i = 0; i < f.ground_truth.size(); ++i) {
      lf.labels.push_back({f.ground_truth_ids[i], f.ground_truth[i], Stage::kGroundTruth});
    }
    gt.frames.push_back(std::move(lf));
  }
  seq.ground_truth = std::move(gt);
  return seq;
}

std::filesystem::path save_sequence(const Sequence & seq, const std::filesystem::path & dir)
{
  Manifest m;
  m.sequence_id = seq.sequence_id;
  m.rsus = seq.rsus;
  for (const auto & f : seq.frames) {
    ManifestFrame mf{f.timestep, f.timestamp, {}};
    for (const auto & c : f.clouds) {
      const int rsu = c.sensor_ids.empty() ? 0 : c.sensor_ids.front();
      char name[64];
      std::snprintf(name, sizeof(name), "clouds/%06d_rsu%d.bin", f.timestep, rsu);
      write_cloud(dir / name, c.points);
      mf.clouds.emplace_back(rsu, name);
    }
    m.frames.push_back(std::move(mf));
  }
  if (seq.ground_truth) {
    write_labels(dir / "ground_truth.labels", *seq.ground_truth);
    m.ground_truth = "ground_truth.labels";
  }
  const auto path = dir / "manifest.json";
  write_manifest(path, m);
  return path;
}

Sequence load_sequence(const std::filesystem::path & manifest_path)
{
  const Manifest m = read_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  Sequence seq;
  seq.sequence_id = m.sequence_id;
  seq.rsus = m.rsus;
  for (const auto & mf : m.frames) {
    SequenceFrame f{mf.timestep, mf.timestamp, {}};
    for (const auto & [rsu, rel] : mf.clouds) {
      PointCloud c = PointCloud::from_points(read_cloud(dir / rel), mf.timestamp, rsu);
      f.clouds.push_back(std::move(c));
    }
    seq.frames.push_back(std::move(f));
  }
  if (m.ground_truth) {
    seq.ground_truth = read_labels(dir / *m.ground_truth);
    check_sequence(seq, *seq.ground_truth);
  }
  return seq;
}

FrameBundle make_bundle(const Sequence & seq, std::size_t index, std::size_t k)
{
  FrameBundle b;
  b.current = merged(seq.frames.at(index));
  const auto n = static_cast<std::ptrdiff_t>(seq.frames.size());
  const auto t = static_cast<std::ptrdiff_t>(index);
  for (std::ptrdiff_t d = 1; b.history.size() < k && (t - d >= 0 || t + d < n); ++d) {
    for (std::ptrdiff_t j : {t - d, t + d}) {
      if (j >= 0 && j < n && b.history.size() < k) {
        b.history.push_back(merged(seq.frames[static_cast<std::size_t>(j)]));
      }
    }
  }
  return b;
}

std::uint64_t frame_seed(const PipelineConfig & cfg, int timestep)
{
  return splitmix64(cfg.seed ^ splitmix64(cfg.discovery.ground.seed + static_cast<std::uint64_t>(timestep)));
}

PointCloud member_cloud(const Sequence & seq, std::size_t index, const PipelineConfig & cfg)
{
  const auto & d = cfg.discovery;
  const PointCloud cropped = crop_cloud(merged(seq.frames.at(index)), d.center, d.detection_range + d.crop_margin);
  GroundParams g = d.ground;
  g.seed = frame_seed(cfg, seq.frames[index].timestep);
  return remove_ground(cropped, g).cloud;
}

LabelFile run_discover(const Sequence & seq, const PipelineConfig & cfg, std::vector<std::string> * warnings)
{
  cfg.validate();
  LabelFile out = empty_labels(seq);
  std::vector<std::vector<std::string>> notes(seq.frames.size());
  parallel_for(seq.frames.size(), cfg.threads, [&](std::size_t i) {
    DiscoveryConfig d = cfg.discovery;
    d.ground.seed = frame_seed(cfg, seq.frames[i].timestep);
    const auto result = discover_detailed(make_bundle(seq, i, d.history_frames), d);
    for (const auto & b : result.boxes) {
      out.frames[i].labels.push_back({-1, b, Stage::kDiscovered});
    }
    notes[i] = result.warnings;
  });
  if (warnings) {
    for (std::size_t i = 0; i < notes.size(); ++i) {
      for (const auto & w : notes[i]) {
        warnings->push_back("timestep " + std::to_string(seq.frames[i].timestep) + ": " + w);
      }
    }
  }
  return out;
}

LabelFile run_track(const Sequence & seq, const LabelFile & discovered, const PipelineConfig & cfg)
{
  cfg.validate();
  check_sequence(seq, discovered);
  std::vector<TrackingFrame> frames(seq.frames.size());
  parallel_for(seq.frames.size(), cfg.threads, [&](std::size_t i) {
    frames[i].timestep = seq.frames[i].timestep;
    frames[i].timestamp = seq.frames[i].timestamp;
    if (const auto * lf = discovered.find(seq.frames[i].timestep)) {
      for (const auto & r : lf->labels) {
        frames[i].detections.push_back(r.box);
      }
    }
    frames[i].cloud = member_cloud(seq, i, cfg);
  });
  const auto tracklets = filter_short_tracklets(track_sequence(frames, cfg.tracking), cfg.min_instances);
  LabelFile out = empty_labels(seq);
  for (const auto & t : tracklets) {
    for (const auto & inst : t.instances) {
      out.frames[frame_index(seq, inst.timestep)].labels.push_back({t.track_id, inst.box, Stage::kTracked});
    }
  }
  return out;
}

std::vector<Tracklet> tracklets_from_labels(const Sequence & seq, const LabelFile & tracked, const PipelineConfig & cfg)
{
  check_sequence(seq, tracked);
  std::map<int, Tracklet> by_id;
  for (const auto & f : tracked.frames) {
    for (const auto & r : f.labels) {
      if (r.track_id < 0) {
        continue;
      }
      auto & t = by_id[r.track_id];
      t.track_id = r.track_id;
      t.instances.push_back({f.timestep, f.timestamp, r.box, {}});
    }
  }
  std::vector<Tracklet> out;
  for (auto & [id, t] : by_id) {
    std::sort(t.instances.begin(), t.instances.end(), [](const auto & a, const auto & b) {
      return a.timestep < b.timestep;
    });
    for (std::size_t i = 1; i < t.instances.size(); ++i) {
      if (t.instances[i].timestep == t.instances[i - 1].timestep) {
        throw ConfigError("track " + std::to_string(id) + " has two boxes at timestep " +
                          std::to_string(t.instances[i].timestep));
      }
    }
    out.push_back(std::move(t));
  }
  // Member points: one ground-free cloud per referenced frame.
  std::vector<std::size_t> needed;
  for (const auto & t : out) {
    for (const auto & inst : t.instances) {
      needed.push_back(frame_index(seq, inst.timestep));
    }
  }
  std::sort(needed.begin(), needed.end());
  needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
  std::vector<PointCloud> clouds(needed.size());
  parallel_for(needed.size(), cfg.threads, [&](std::size_t i) { clouds[i] = member_cloud(seq, needed[i], cfg); });
  for (auto & t : out) {
    for (auto & inst : t.instances) {
      const auto idx = std::lower_bound(needed.begin(), needed.end(), frame_index(seq, inst.timestep)) - needed.begin();
      inst.points = points_in_box(clouds[static_cast<std::size_t>(idx)], inst.box, cfg.tracking.member_margin);
    }
  }
  return out;
}

LabelFile run_refine(const Sequence & seq, const LabelFile & tracked, const PipelineConfig & cfg)
{
  cfg.validate();
  const auto tracklets = tracklets_from_labels(seq, tracked, cfg);
  std::vector<RefinedTracklet> refined(tracklets.size());
  parallel_for(tracklets.size(), cfg.threads, [&](std::size_t i) {
    refined[i] = refine_tracklet(tracklets[i], cfg.refinement);
  });
  LabelFile out = empty_labels(seq);
  for (const auto & r : refined) {
    const Stage stage = r.refined ? Stage::kRefined : Stage::kTracked;
    for (const auto & inst : r.tracklet.instances) {
      out.frames[frame_index(seq, inst.timestep)].labels.push_back({r.tracklet.track_id, inst.box, stage});
    }
  }
  return out;
}

EvalReport run_eval(const LabelFile & dets, const LabelFile & gt, const PipelineConfig & cfg)
{
  if (dets.sequence_id != gt.sequence_id) {
    throw ConfigError(
      "sequence id mismatch: labels '" + dets.sequence_id + "', ground truth '" + gt.sequence_id + "'");
  }
  std::vector<FrameBoxes> d;
  std::vector<FrameBoxes> g;
  for (const auto & f : gt.frames) {
    FrameBoxes gb{f.timestep, {}};
    std::vector<BoundingBox> all;
    for (const auto & r : f.labels) {
      all.push_back(r.box);
    }
    gb.boxes = filter_by_range(all, cfg.discovery.center, cfg.discovery.detection_range);
    g.push_back(std::move(gb));
    FrameBoxes db{f.timestep, {}};
    if (const auto * df = dets.find(f.timestep)) {
      for (const auto & r : df->labels) {
        db.boxes.push_back(r.box);
      }
    }
    d.push_back(std::move(db));
  }
  for (const auto & f : dets.frames) {
    if (!gt.find(f.timestep)) {
      throw ParameterError("labels contain timestep " + std::to_string(f.timestep) + " absent from ground truth");
    }
  }
  return compute_report(d, g, cfg.eval_iou, cfg.eval_velocity);
}

std::string format_report_json(const EvalReport & r, const std::string & sequence_id, double iou_thresh)
{
  nlohmann::ordered_json j;
  j["sequence_id"] = sequence_id;
  j["iou_threshold"] = iou_thresh;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["recall"] = r.recall;
  j["precision"] = r.precision;
  j["ate"] = r.ate;
  j["ase"] = r.ase;
  j["aoe"] = r.aoe;
  if (r.ave) {
    j["ave"] = *r.ave;
  }
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto & f : r.frames) {
    j["frames"].push_back({{"timestep", f.timestep}, {"tp", f.tp}, {"fp", f.fp}, {"fn", f.fn}});
  }
  return j.dump(2) + "\n";
}

std::string format_report_table(const EvalReport & r)
{
  char buf[512];
  std::snprintf(
    buf, sizeof(buf),
    "%-10s %8s\n%-10s %8zu\n%-10s %8zu\n%-10s %8zu\n%-10s %8.4f\n%-10s %8.4f\n%-10s %8.4f\n%-10s %8.4f\n%-10s %8.4f\n",
    "metric", "value", "tp", r.tp, "fp", r.fp, "fn", r.fn, "recall", r.recall, "precision", r.precision, "ate [m]",
    r.ate, "ase", r.ase, "aoe [rad]", r.aoe);
  std::string out = buf;
  if (r.ave) {
    std::snprintf(buf, sizeof(buf), "%-10s %8.4f\n", "ave [m/s]", *r.ave);
    out += buf;
  }
  return out;
}

FlowStats run_flow(const Sequence & seq, std::size_t from, std::size_t to, const PipelineConfig & cfg)
{
  if (from >= seq.frames.size() || to >= seq.frames.size()) {
    throw ParameterError("flow frame index out of range");
  }
  const PointCloud src = member_cloud(seq, from, cfg);
  const PointCloud dst = member_cloud(seq, to, cfg);
  const auto detail = estimate_scene_flow_detailed(src.points, dst.points, cfg.discovery.flow);
  FlowStats s;
  s.source_points = src.size();
  s.target_points = dst.size();
  s.source_clusters = detail.source_clusters.cluster_count;
  s.target_clusters = detail.target_clusters.cluster_count;
  s.matched_clusters = detail.assignment.matched();
  double sum = 0.0;
  for (const auto & f : detail.flow) {
    const double m = f.norm();
    sum += m;
    s.max_magnitude = std::max(s.max_magnitude, m);
    s.moving_points += m > kMovingFlow ? 1 : 0;
  }
  s.mean_magnitude = detail.flow.empty() ? 0.0 : sum / static_cast<double>(detail.flow.size());
  return s;
}

std::string format_flow_json(const FlowStats & s)
{
  nlohmann::ordered_json j;
  j["source_points"] = s.source_points;
  j["target_points"] = s.target_points;
  j["source_clusters"] = s.source_clusters;
  j["target_clusters"] = s.target_clusters;
  j["matched_clusters"] = s.matched_clusters;
  j["moving_points"] = s.moving_points;
  j["mean_magnitude"] = s.mean_magnitude;
  j["max_magnitude"] = s.max_magnitude;
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const Sequence & seq, const PipelineConfig & cfg, const std::filesystem::path & out_dir)
{
  PipelineResult res;
  auto stage = [&](const LabelFile & labels, const char * name) {
    if (!out_dir.empty()) {
      write_labels(out_dir / name, labels);
      return read_labels(out_dir / name);
    }
    return round_trip(labels);
  };
  res.discovered = stage(run_discover(seq, cfg), "discovered.labels");
  res.tracked = stage(run_track(seq, res.discovered, cfg), "tracked.labels");
  res.refined = stage(run_refine(seq, res.tracked, cfg), "refined.labels");
  if (seq.ground_truth) {
    res.report = run_eval(res.refined, *seq.ground_truth, cfg);
    if (!out_dir.empty()) {
      write_file(out_dir / "report.json", format_report_json(*res.report, seq.sequence_id, cfg.eval_iou));
    }
  }
  return res;
}

}  // namespace rsulabel
