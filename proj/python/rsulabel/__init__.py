# Copyright 2026 The rsulabel Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Auto-labeling of vehicles in roadside LiDAR sequences."""

from rsulabel._core import (
    BoundingBox,
    ConfigError,
    DegenerateInputError,
    Error,
    ParameterError,
    ParseError,
    bev_iou,
    dbscan,
    decode_cloud,
    default_config,
    encode_cloud,
    fit_box_lshape,
    hdbscan,
    hungarian,
    icp,
    match_frame,
    refine_pose,
    run_pipeline,
)

__all__ = [
    "BoundingBox",
    "ConfigError",
    "DegenerateInputError",
    "Error",
    "ParameterError",
    "ParseError",
    "bev_iou",
    "dbscan",
    "decode_cloud",
    "default_config",
    "encode_cloud",
    "fit_box_lshape",
    "hdbscan",
    "hungarian",
    "icp",
    "match_frame",
    "refine_pose",
    "run_pipeline",
]
