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
/// \brief Pipeline configuration and its JSON form.
#ifndef RSULABEL__CONFIG_HPP_
#define RSULABEL__CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "rsulabel/discovery.hpp"
#include "rsulabel/refinement.hpp"
#include "rsulabel/simulator.hpp"
#include "rsulabel/tracking.hpp"

namespace rsulabel
{

/// Simulated input: a fixture preset name, or "intersection" for a random scene.
struct SimSource
{
  std::string preset = "static_car";
  int vehicles = 8;
  int frames = 20;
};

struct PipelineConfig
{
  /// Defaults to the simulator preset name.
  std::string sequence_id;
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<SimSource> sim;
  DiscoveryConfig discovery;
  TrackingConfig tracking;
  std::size_t min_instances = 4;
  RefinementParams refinement;
  double eval_iou = 0.3;
  bool eval_velocity = false;

  /// Throws ConfigError.
  void validate() const;
};

/// Pretty JSON holding every field.
std::string format_config(const PipelineConfig & cfg);
/// Missing keys keep their defaults; unknown keys and wrong types raise ConfigError,
/// malformed JSON raises ParseError. The result is validated.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path & path);

/// Simulator configuration for a source; `seed` drives sensor noise and, for the random
/// scenes, the layout.
SimConfig resolve_sim(const SimSource & source, std::uint64_t seed);

}  // namespace rsulabel

#endif  // RSULABEL__CONFIG_HPP_
