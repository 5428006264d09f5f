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

#include "rsulabel/config.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "rsulabel/error.hpp"
#include "rsulabel/io.hpp"

namespace rsulabel
{

namespace
{

using Json = nlohmann::ordered_json;

template <typename A>
void visit(A & a, IcpParams & p)
{
  a("max_iter", p.max_iter);
  a("corr_dist", p.corr_dist);
  a("tol", p.tol);
}

template <typename A>
void visit(A & a, LShapeParams & p)
{
  a("heading_resolution_deg", p.heading_resolution_deg);
  a("z_low_quantile", p.z_low_quantile);
  a("z_high_quantile", p.z_high_quantile);
  a("min_height", p.min_height);
}

template <typename A>
void visit(A & a, DimensionLimits & p)
{
  a("min_l", p.min_l);
  a("max_l", p.max_l);
  a("min_w", p.min_w);
  a("max_w", p.max_w);
  a("min_h", p.min_h);
  a("max_h", p.max_h);
}

template <typename A>
void visit(A & a, GroundParams & p)
{
  a("distance_threshold", p.distance_threshold);
  a("max_tilt_deg", p.max_tilt_deg);
  a("iterations", p.iterations);
  a("min_inlier_fraction", p.min_inlier_fraction);
  a("score_sample", p.score_sample);
  a("seed", p.seed);
}

template <typename A>
void visit(A & a, FlowConfig & p)
{
  a("min_cluster_size", p.min_cluster_size);
  a("centroid_gate", p.centroid_gate);
  a("gated_cost", p.gated_cost);
  a("max_match_cost", p.max_match_cost);
  a("max_icp_points", p.max_icp_points);
  a("try_identity", p.try_identity);
  a("identity_margin", p.identity_margin);
  a.nested("icp", p.icp);
}

template <typename A>
void visit(A & a, DiscoveryConfig & p)
{
  a("scales", p.scales);
  a("eps", p.eps);
  a("min_pts", p.min_pts);
  a("history_frames", p.history_frames);
  a("detection_range", p.detection_range);
  a("center", p.center);
  a("crop_margin", p.crop_margin);
  a.nested("dim_limits", p.dim_limits);
  a.nested("ground", p.ground);
  a.nested("flow", p.flow);
  a.nested("lshape", p.lshape);
}

template <typename A>
void visit(A & a, KalmanParams & p)
{
  a("q_position", p.q_position);
  a("q_yaw", p.q_yaw);
  a("q_dims", p.q_dims);
  a("q_velocity", p.q_velocity);
  a("r_position", p.r_position);
  a("r_yaw", p.r_yaw);
  a("r_dims", p.r_dims);
  a("initial_velocity_var", p.initial_velocity_var);
  a("min_dim", p.min_dim);
}

struct TrackingSection
{
  TrackingConfig * cfg;
  std::size_t * min_instances;
};

template <typename A>
void visit(A & a, TrackingSection & s)
{
  a("iou_gate", s.cfg->iou_gate);
  a("max_miss", s.cfg->max_miss);
  a("min_hits", s.cfg->min_hits);
  a("member_margin", s.cfg->member_margin);
  a("min_instances", *s.min_instances);
  a.nested("kalman", s.cfg->kalman);
}

template <typename A>
void visit(A & a, RefinementParams & p)
{
  a("min_points", p.min_points);
  a("multi_hypothesis", p.multi_hypothesis);
  a("score_dist", p.score_dist);
  a("hypothesis_points", p.hypothesis_points);
  a("hypothesis_iters", p.hypothesis_iters);
  a("hypothesis_tolerance", p.hypothesis_tolerance);
  a("heading_window", p.heading_window);
  a.nested("icp", p.icp);
  a.nested("lshape", p.lshape);
}

template <typename A>
void visit(A & a, SimSource & p)
{
  a("preset", p.preset);
  a("vehicles", p.vehicles);
  a("frames", p.frames);
}

struct EvalSection
{
  double * iou;
  bool * velocity;
};

template <typename A>
void visit(A & a, EvalSection & s)
{
  a("iou_threshold", *s.iou);
  a("velocity", *s.velocity);
}

template <typename A>
void visit_root(A & a, PipelineConfig & c)
{
  a("sequence_id", c.sequence_id);
  a("seed", c.seed);
  a("threads", c.threads);
  if (c.sim) {
    a.nested("sim", *c.sim);
  }
  a.nested("discovery", c.discovery);
  TrackingSection t{&c.tracking, &c.min_instances};
  a.nested("tracking", t);
  a.nested("refinement", c.refinement);
  EvalSection e{&c.eval_iou, &c.eval_velocity};
  a.nested("evaluation", e);
}

class Writer
{
public:
  explicit Writer(Json & j) : j_(j) {}

  template <typename T>
  void operator()(const char * key, T & v)
  {
    j_[key] = v;
  }
  void operator()(const char * key, Vec2 & v) { j_[key] = {v.x(), v.y()}; }

  template <typename T>
  void nested(const char * key, T & v)
  {
    Json sub = Json::object();
    Writer w(sub);
    visit(w, v);
    j_[key] = std::move(sub);
  }

private:
  Json & j_;
};

class Reader
{
public:
  Reader(const Json & j, std::string path) : j_(j), path_(std::move(path))
  {
    if (!j_.is_object()) {
      throw ConfigError("config: '" + where() + "' must be an object");
    }
  }

  template <typename T>
  void operator()(const char * key, T & v)
  {
    used_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      v = j_.at(key).template get<T>();
    } catch (const nlohmann::json::exception &) {
      throw ConfigError("config: wrong type for '" + where(key) + "'");
    }
  }
  void operator()(const char * key, Vec2 & v)
  {
    std::vector<double> xy{v.x(), v.y()};
    (*this)(key, xy);
    if (xy.size() != 2) {
      throw ConfigError("config: '" + where(key) + "' needs two numbers");
    }
    v = Vec2(xy[0], xy[1]);
  }

  template <typename T>
  void nested(const char * key, T & v)
  {
    used_.insert(key);
    if (j_.contains(key)) {
      Reader r(j_.at(key), where(key));
      visit(r, v);
      r.finish();
    }
  }

  void finish() const
  {
    for (const auto & item : j_.items()) {
      if (!used_.count(item.key())) {
        throw ConfigError("config: unknown key '" + where(item.key()) + "'");
      }
    }
  }

private:
  std::string where(const std::string & key = {}) const
  {
    if (key.empty()) {
      return path_.empty() ? "<root>" : path_;
    }
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json & j_;
  std::string path_;
  std::set<std::string> used_;
};

bool lshape_valid(const LShapeParams & p)
{
  return p.heading_resolution_deg > 0.0 && p.heading_resolution_deg <= 90.0 && p.z_low_quantile >= 0.0 &&
         p.z_low_quantile < p.z_high_quantile && p.z_high_quantile <= 1.0;
}

}  // namespace

void PipelineConfig::validate() const
{
  discovery.validate();
  if (!(tracking.iou_gate > 0.0 && tracking.iou_gate < 1.0)) {
    throw ConfigError("tracking.iou_gate must lie in (0, 1)");
  }
  if (tracking.max_miss < 0 || tracking.min_hits < 1 || tracking.member_margin < 0.0) {
    throw ConfigError("tracking needs max_miss >= 0, min_hits >= 1 and member_margin >= 0");
  }
  if (min_instances < 1) {
    throw ConfigError("tracking.min_instances must be >= 1");
  }
  if (!(eval_iou > 0.0 && eval_iou < 1.0)) {
    throw ConfigError("evaluation.iou_threshold must lie in (0, 1)");
  }
  if (threads < 1) {
    throw ConfigError("threads must be >= 1");
  }
  if (refinement.icp.max_iter < 1 || !(refinement.icp.corr_dist > 0.0) || refinement.min_points < 3) {
    throw ConfigError("refinement needs icp.max_iter >= 1, icp.corr_dist > 0 and min_points >= 3");
  }
  if (refinement.hypothesis_points < 1 || refinement.hypothesis_iters < 1 || !(refinement.score_dist > 0.0) ||
      refinement.hypothesis_tolerance < 0.0)
  {
    throw ConfigError(
      "refinement needs hypothesis_points >= 1, hypothesis_iters >= 1, score_dist > 0 and hypothesis_tolerance >= 0");
  }
  if (!(lshape_valid(discovery.lshape) && lshape_valid(refinement.lshape))) {
    throw ConfigError("lshape needs a heading resolution in (0, 90] and quantiles 0 <= low < high <= 1");
  }
  if (sim && sim->preset == "intersection" && (sim->vehicles < 1 || sim->frames < 1)) {
    throw ConfigError("sim.vehicles and sim.frames must be >= 1");
  }
}

std::string format_config(const PipelineConfig & cfg)
{
  PipelineConfig c = cfg;
  Json j = Json::object();
  Writer w(j);
  visit_root(w, c);
  return j.dump(2) + "\n";
}

PipelineConfig parse_config(std::string_view text)
{
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(ParseError::Kind::kSyntax, std::string("config: ") + e.what());
  }
  PipelineConfig c;
  if (j.is_object() && j.contains("sim")) {
    c.sim = SimSource{};
  }
  Reader r(j, "");
  visit_root(r, c);
  r.finish();
  if (c.sequence_id.empty()) {
    c.sequence_id = c.sim ? c.sim->preset : "sequence";
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path & path) { return parse_config(read_file(path)); }

SimConfig resolve_sim(const SimSource & source, std::uint64_t seed)
{
  SimConfig cfg;
  if (source.preset == "intersection") {
    cfg = intersection_scene(seed, source.vehicles, source.frames);
  } else if (source.preset == "partial_visibility") {
    cfg = partial_visibility_scene(seed);
  } else {
    cfg = fixture(source.preset);
    cfg.seed = seed;
  }
  return cfg;
}

}  // namespace rsulabel
