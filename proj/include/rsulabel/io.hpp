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
/// \brief On-disk formats: binary point clouds, text label files and JSON sequence manifests.
#ifndef RSULABEL__IO_HPP_
#define RSULABEL__IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsulabel/geometry.hpp"

namespace rsulabel
{

/// Cloud file: 8-byte magic, u32 version, u64 point count, then count x (f32 x, f32 y, f32 z),
/// all little-endian. Coordinates are stored as float.
inline constexpr std::string_view kCloudMagic = "RSUCLOUD";
inline constexpr std::uint32_t kCloudVersion = 1;
inline constexpr std::size_t kCloudHeaderBytes = 20;

std::string encode_cloud(std::span<const Vec3> points);
/// Throws ParseError (kBadMagic, kBadVersion, kTruncated or kCountMismatch).
PointSet decode_cloud(std::string_view bytes);
void write_cloud(const std::filesystem::path & path, std::span<const Vec3> points);
PointSet read_cloud(const std::filesystem::path & path);

enum class Stage { kDiscovered, kTracked, kRefined, kGroundTruth };

std::string_view stage_name(Stage stage);
/// Throws ParseError for unknown names.
Stage parse_stage(std::string_view name);

struct LabelRecord
{
  /// -1 when the box belongs to no track.
  int track_id = -1;
  BoundingBox box;
  Stage stage = Stage::kDiscovered;
};

struct LabelFrame
{
  int timestep = 0;
  double timestamp = 0.0;
  std::vector<LabelRecord> labels;
};

struct LabelFile
{
  std::string sequence_id;
  std::vector<LabelFrame> frames;

  /// Frame with the given timestep, or nullptr.
  const LabelFrame * find(int timestep) const;
};

inline constexpr int kLabelSchemaVersion = 1;
/// Column order of label records.
inline constexpr std::string_view kLabelColumns = "track_id cx cy cz w l h theta vx vy stage";

/// Line-oriented text with six decimals per number:
///
///   # rsulabel labels
///   version 1
///   sequence <id>
///   columns track_id cx cy cz w l h theta vx vy stage
///   frame <timestep> <timestamp> <count>
///   <count record lines>
///
/// Throws ParameterError when the sequence id is empty or contains whitespace.
std::string format_labels(const LabelFile & labels);
/// Throws ParseError: kSchemaVersion names both versions, unknown columns are named.
LabelFile parse_labels(std::string_view text);
void write_labels(const std::filesystem::path & path, const LabelFile & labels);
LabelFile read_labels(const std::filesystem::path & path);

struct RsuInfo
{
  int id = 0;
  Vec3 position = Vec3::Zero();
};

struct ManifestFrame
{
  int timestep = 0;
  double timestamp = 0.0;
  /// (RSU id, cloud path relative to the manifest directory).
  std::vector<std::pair<int, std::string>> clouds;
};

struct Manifest
{
  std::string sequence_id;
  std::vector<RsuInfo> rsus;
  std::vector<ManifestFrame> frames;
  /// Ground-truth label file relative to the manifest directory.
  std::optional<std::string> ground_truth;
};

inline constexpr int kManifestVersion = 1;

std::string format_manifest(const Manifest & manifest);
/// Throws ParseError on malformed JSON or a wrong version, ConfigError on unknown RSU ids or
/// timesteps that do not strictly increase.
Manifest parse_manifest(std::string_view text);
void write_manifest(const std::filesystem::path & path, const Manifest & manifest);
/// Also checks that every referenced file exists (ConfigError otherwise).
Manifest read_manifest(const std::filesystem::path & path);

/// Whole file as bytes; throws Error when it cannot be opened.
std::string read_file(const std::filesystem::path & path);
void write_file(const std::filesystem::path & path, std::string_view bytes);

}  // namespace rsulabel

#endif  // RSULABEL__IO_HPP_
