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

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <string>

#include "rsulabel/clustering.hpp"
#include "rsulabel/config.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/evaluation.hpp"
#include "rsulabel/geometry.hpp"
#include "rsulabel/io.hpp"
#include "rsulabel/pipeline.hpp"
#include "rsulabel/refinement.hpp"
#include "rsulabel/registration.hpp"

namespace py = pybind11;
using namespace rsulabel;

namespace
{

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointSet to_points(const Array & a)
{
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw ParameterError("expected an (N, 3) array");
  }
  auto r = a.unchecked<2>();
  PointSet out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    out[i] = Vec3(r(i, 0), r(i, 1), r(i, 2));
  }
  return out;
}

Array to_array(const PointSet & pts)
{
  Array out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      w(i, k) = pts[i][k];
    }
  }
  return out;
}

py::dict report_dict(const EvalReport & r)
{
  py::dict d;
  d["tp"] = r.tp;
  d["fp"] = r.fp;
  d["fn"] = r.fn;
  d["recall"] = r.recall;
  d["precision"] = r.precision;
  d["ate"] = r.ate;
  d["ase"] = r.ase;
  d["aoe"] = r.aoe;
  if (r.ave) {
    d["ave"] = *r.ave;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Auto-labeling of vehicles in roadside LiDAR sequences";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", error);
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", error);
  py::register_exception<ConfigError>(m, "ConfigError", error);
  py::register_exception<ParseError>(m, "ParseError", error);

  py::class_<BoundingBox>(m, "BoundingBox")
    .def(
      py::init([](double cx, double cy, double cz, double w, double l, double h, double theta, double vx, double vy) {
        return BoundingBox{cx, cy, cz, w, l, h, theta, vx, vy};
      }),
      py::arg("cx") = 0.0, py::arg("cy") = 0.0, py::arg("cz") = 0.0, py::arg("w") = 1.0, py::arg("l") = 1.0,
      py::arg("h") = 1.0, py::arg("theta") = 0.0, py::arg("vx") = 0.0, py::arg("vy") = 0.0)
    .def_readwrite("cx", &BoundingBox::cx)
    .def_readwrite("cy", &BoundingBox::cy)
    .def_readwrite("cz", &BoundingBox::cz)
    .def_readwrite("w", &BoundingBox::w)
    .def_readwrite("l", &BoundingBox::l)
    .def_readwrite("h", &BoundingBox::h)
    .def_readwrite("theta", &BoundingBox::theta)
    .def_readwrite("vx", &BoundingBox::vx)
    .def_readwrite("vy", &BoundingBox::vy)
    .def("footprint", &BoundingBox::footprint)
    .def("__repr__", [](const BoundingBox & b) {
      return "BoundingBox(cx=" + std::to_string(b.cx) + ", cy=" + std::to_string(b.cy) + ", l=" + std::to_string(b.l) +
             ", w=" + std::to_string(b.w) + ", theta=" + std::to_string(b.theta) + ")";
    });

  m.def("bev_iou", &bev_iou, py::arg("a"), py::arg("b"));
  m.def(
    "fit_box_lshape", [](const Array & pts) { return fit_box_lshape(to_points(pts)); }, py::arg("points"),
    "L-shape box fit of an (N, 3) cluster.");

  m.def(
    "dbscan",
    [](const Array & pts, double eps, std::size_t min_pts) {
      return dbscan(to_points(pts), eps, min_pts).labels;
    },
    py::arg("points"), py::arg("eps"), py::arg("min_pts"), "Cluster label per point, -1 for noise.");
  m.def(
    "hdbscan",
    [](const Array & pts, std::size_t min_cluster_size) { return hdbscan(to_points(pts), min_cluster_size).labels; },
    py::arg("points"), py::arg("min_cluster_size"));

  m.def(
    "hungarian",
    [](const Eigen::MatrixXd & cost) {
      const Assignment a = hungarian(cost);
      return py::make_tuple(a.row_to_col, a.total_cost);
    },
    py::arg("cost"), "Minimum-cost assignment: (column per row or -1, total cost).");

  m.def(
    "icp",
    [](const Array & source, const Array & target, int max_iter, double corr_dist, double tol) {
      const IcpResult r = icp(to_points(source), to_points(target), RigidTransform(), IcpParams{max_iter, corr_dist, tol});
      return py::make_tuple(Eigen::Matrix4d(r.transform.matrix()), r.inlier_ratio, r.inlier_rmse);
    },
    py::arg("source"), py::arg("target"), py::arg("max_iter") = 50, py::arg("corr_dist") = 1.0, py::arg("tol") = 1e-6,
    "Point-to-point ICP from the identity: (4x4 transform, inlier ratio, inlier RMSE).");

  m.def(
    "refine_pose",
    [](const Array & world, const Array & body) {
      const PoseEstimate p = refine_pose(to_points(world), to_points(body));
      return py::make_tuple(p.cx, p.cy, p.cz, p.theta);
    },
    py::arg("world"), py::arg("body"), "Closed-form (cx, cy, cz, theta).");

  m.def(
    "match_frame",
    [](const std::vector<BoundingBox> & dets, const std::vector<BoundingBox> & gts, double iou_thresh) {
      const FrameMatch fm = match_frame(dets, gts, iou_thresh);
      return py::make_tuple(fm.pairs, fm.ious);
    },
    py::arg("detections"), py::arg("ground_truth"), py::arg("iou_thresh") = 0.3);

  m.def("encode_cloud", [](const Array & pts) { return py::bytes(encode_cloud(to_points(pts))); });
  m.def("decode_cloud", [](const py::bytes & b) { return to_array(decode_cloud(std::string(b))); });

  m.def(
    "run_pipeline",
    [](const std::string & config_json, const std::string & out_dir) {
      const PipelineConfig cfg = parse_config(config_json);
      if (!cfg.sim) {
        throw ConfigError("the configuration needs a \"sim\" section");
      }
      PipelineResult res;
      {
        py::gil_scoped_release release;
        const SimConfig sc = resolve_sim(*cfg.sim, cfg.seed);
        const Sequence seq = sequence_from_simulation(sc, simulate(sc, cfg.threads), cfg.sequence_id);
        res = run_pipeline(seq, cfg, out_dir);
      }
      py::dict d;
      d["discovered"] = format_labels(res.discovered);
      d["tracked"] = format_labels(res.tracked);
      d["refined"] = format_labels(res.refined);
      if (res.report) {
        d["report"] = report_dict(*res.report);
      }
      return d;
    },
    py::arg("config_json"), py::arg("out_dir") = std::string(),
    "Simulate the configured scene and run every stage; returns label texts and the report.");
  m.def("default_config", [] { return format_config(PipelineConfig{}); });
}
