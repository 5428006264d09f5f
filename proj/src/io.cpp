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

#include "rsulabel/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "rsulabel/error.hpp"

namespace rsulabel
{

static_assert(std::endian::native == std::endian::little, "cloud files assume a little-endian host");

std::string read_file(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path & path, std::string_view bytes)
{
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write '" + path.string() + "'");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("write failed for '" + path.string() + "'");
  }
}

std::string encode_cloud(std::span<const Vec3> points)
{
  std::string out(kCloudHeaderBytes + points.size() * 12, '\0');
  char * p = out.data();
  std::memcpy(p, kCloudMagic.data(), 8);
  std::memcpy(p + 8, &kCloudVersion, 4);
  const std::uint64_t count = points.size();
  std::memcpy(p + 12, &count, 8);
  p += kCloudHeaderBytes;
  for (const auto & pt : points) {
    const float xyz[3] = {static_cast<float>(pt.x()), static_cast<float>(pt.y()), static_cast<float>(pt.z())};
    std::memcpy(p, xyz, 12);
    p += 12;
  }
  return out;
}

PointSet decode_cloud(std::string_view bytes)
{
  using K = ParseError::Kind;
  if (bytes.size() < 8 || bytes.substr(0, 8) != kCloudMagic) {
    throw ParseError(K::kBadMagic, "not a cloud file: bad magic");
  }
  if (bytes.size() < kCloudHeaderBytes) {
    throw ParseError(K::kTruncated, "cloud header truncated");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  if (version != kCloudVersion) {
    throw ParseError(
      K::kBadVersion,
      "cloud version " + std::to_string(version) + " unsupported (expected " + std::to_string(kCloudVersion) + ")");
  }
  std::uint64_t count = 0;
  std::memcpy(&count, bytes.data() + 12, 8);
  const std::size_t payload = bytes.size() - kCloudHeaderBytes;
  if (payload % 12 != 0 || payload / 12 < count) {
    throw ParseError(
      K::kTruncated, "cloud payload truncated: header announces " + std::to_string(count) + " points, " +
                       std::to_string(payload) + " payload bytes");
  }
  if (payload / 12 != count) {
    throw ParseError(
      K::kCountMismatch, "cloud count mismatch: header announces " + std::to_string(count) + " points, payload holds " +
                           std::to_string(payload / 12));
  }
  PointSet pts(count);
  const char * p = bytes.data() + kCloudHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i, p += 12) {
    float xyz[3];
    std::memcpy(xyz, p, 12);
    pts[i] = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  return pts;
}

void write_cloud(const std::filesystem::path & path, std::span<const Vec3> points)
{
  write_file(path, encode_cloud(points));
}

PointSet read_cloud(const std::filesystem::path & path) { return decode_cloud(read_file(path)); }

namespace
{

constexpr std::string_view kStageNames[] = {"discovered", "tracked", "refined", "ground_truth"};

void append_number(std::string & out, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  if (std::strcmp(buf, "-0.000000") == 0) {
    out += "0.000000";
  } else {
    out += buf;
  }
}

std::vector<std::string_view> split_ws(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

ParseError syntax_error(std::size_t line_no, const std::string & what)
{
  return ParseError(ParseError::Kind::kSyntax, "line " + std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no)
{
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw syntax_error(line_no, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

std::string_view stage_name(Stage stage) { return kStageNames[static_cast<int>(stage)]; }

Stage parse_stage(std::string_view name)
{
  for (int i = 0; i < 4; ++i) {
    if (kStageNames[i] == name) {
      return static_cast<Stage>(i);
    }
  }
  throw ParseError(ParseError::Kind::kSyntax, "unknown stage '" + std::string(name) + "'");
}

const LabelFrame * LabelFile::find(int timestep) const
{
  for (const auto & f : frames) {
    if (f.timestep == timestep) {
      return &f;
    }
  }
  return nullptr;
}

std::string format_labels(const LabelFile & labels)
{
  if (labels.sequence_id.empty() || split_ws(labels.sequence_id).size() != 1 ||
      split_ws(labels.sequence_id)[0].size() != labels.sequence_id.size())
  {
    throw ParameterError("sequence id must be a non-empty token without whitespace");
  }
  std::string out = "# rsulabel labels\nversion " + std::to_string(kLabelSchemaVersion) + "\nsequence " +
                    labels.sequence_id + "\ncolumns " + std::string(kLabelColumns) + "\n";
  for (const auto & f : labels.frames) {
    out += "frame " + std::to_string(f.timestep) + " ";
    append_number(out, f.timestamp);
    out += " " + std::to_string(f.labels.size()) + "\n";
    for (const auto & r : f.labels) {
      const auto & b = r.box;
      out += std::to_string(r.track_id);
      for (double v : {b.cx, b.cy, b.cz, b.w, b.l, b.h, b.theta, b.vx, b.vy}) {
        out += ' ';
        append_number(out, v);
      }
      out += ' ';
      out += stage_name(r.stage);
      out += '\n';
    }
  }
  return out;
}

LabelFile parse_labels(std::string_view text)
{
  using K = ParseError::Kind;
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  std::size_t i = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    while (i < lines.size()) {
      auto toks = split_ws(lines[i++]);
      if (!toks.empty() && toks[0].front() != '#') {
        return toks;
      }
    }
    return {};
  };

  LabelFile out;
  auto toks = next();
  if (toks.size() != 2 || toks[0] != "version") {
    throw syntax_error(i, "expected 'version <n>'");
  }
  const int version = parse_number<int>(toks[1], i);
  if (version != kLabelSchemaVersion) {
    throw ParseError(
      K::kSchemaVersion, "label schema version " + std::to_string(version) + " does not match supported version " +
                           std::to_string(kLabelSchemaVersion));
  }
  toks = next();
  if (toks.size() != 2 || toks[0] != "sequence") {
    throw syntax_error(i, "expected 'sequence <id>'");
  }
  out.sequence_id = std::string(toks[1]);
  toks = next();
  if (toks.empty() || toks[0] != "columns") {
    throw syntax_error(i, "expected 'columns ...'");
  }
  const auto expected = split_ws(kLabelColumns);
  for (std::size_t c = 1; c < toks.size(); ++c) {
    if (std::find(expected.begin(), expected.end(), toks[c]) == expected.end()) {
      throw syntax_error(i, "unknown column '" + std::string(toks[c]) + "'");
    }
  }
  if (toks.size() != expected.size() + 1 || !std::equal(expected.begin(), expected.end(), toks.begin() + 1)) {
    throw syntax_error(i, "columns must be '" + std::string(kLabelColumns) + "'");
  }

  std::set<int> seen;
  for (toks = next(); !toks.empty(); toks = next()) {
    if (toks[0] != "frame" || toks.size() != 4) {
      throw syntax_error(i, "expected 'frame <timestep> <timestamp> <count>'");
    }
    LabelFrame f;
    f.timestep = parse_number<int>(toks[1], i);
    f.timestamp = parse_number<double>(toks[2], i);
    const auto count = parse_number<std::size_t>(toks[3], i);
    if (!seen.insert(f.timestep).second) {
      throw syntax_error(i, "duplicate frame " + std::to_string(f.timestep));
    }
    for (std::size_t k = 0; k < count; ++k) {
      auto rec = next();
      if (rec.empty()) {
        throw ParseError(K::kTruncated, "frame " + std::to_string(f.timestep) + " ends early");
      }
      if (rec.size() != expected.size()) {
        throw syntax_error(i, "expected " + std::to_string(expected.size()) + " fields");
      }
      LabelRecord r;
      r.track_id = parse_number<int>(rec[0], i);
      double v[9];
      for (int c = 0; c < 9; ++c) {
        v[c] = parse_number<double>(rec[1 + c], i);
      }
      r.box.cx = v[0];
      r.box.cy = v[1];
      r.box.cz = v[2];
      r.box.w = v[3];
      r.box.l = v[4];
      r.box.h = v[5];
      r.box.theta = v[6];
      r.box.vx = v[7];
      r.box.vy = v[8];
      r.stage = parse_stage(rec[10]);
      f.labels.push_back(r);
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

void write_labels(const std::filesystem::path & path, const LabelFile & labels)
{
  write_file(path, format_labels(labels));
}

LabelFile read_labels(const std::filesystem::path & path) { return parse_labels(read_file(path)); }

std::string format_manifest(const Manifest & m)
{
  nlohmann::ordered_json j;
  j["format"] = "rsulabel-manifest";
  j["version"] = kManifestVersion;
  j["sequence_id"] = m.sequence_id;
  j["units"] = {{"length", "m"}, {"time", "s"}};
  j["rsus"] = nlohmann::ordered_json::array();
  for (const auto & r : m.rsus) {
    j["rsus"].push_back({{"id", r.id}, {"position", {r.position.x(), r.position.y(), r.position.z()}}});
  }
  j["frames"] = nlohmann::ordered_json::array();
  for (const auto & f : m.frames) {
    nlohmann::ordered_json clouds = nlohmann::ordered_json::array();
    for (const auto & [rsu, path] : f.clouds) {
      clouds.push_back({{"rsu", rsu}, {"path", path}});
    }
    j["frames"].push_back({{"timestep", f.timestep}, {"timestamp", f.timestamp}, {"clouds", clouds}});
  }
  if (m.ground_truth) {
    j["ground_truth"] = *m.ground_truth;
  }
  return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text)
{
  using K = ParseError::Kind;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(K::kSyntax, std::string("manifest: ") + e.what());
  }
  Manifest m;
  try {
    if (j.value("format", "") != "rsulabel-manifest") {
      throw ParseError(K::kBadMagic, "manifest: missing format tag 'rsulabel-manifest'");
    }
    const int version = j.at("version").get<int>();
    if (version != kManifestVersion) {
      throw ParseError(
        K::kSchemaVersion, "manifest version " + std::to_string(version) + " does not match supported version " +
                             std::to_string(kManifestVersion));
    }
    m.sequence_id = j.at("sequence_id").get<std::string>();
    const auto & units = j.at("units");
    if (units.at("length") != "m" || units.at("time") != "s") {
      throw ConfigError("manifest: units must be meters and seconds");
    }
    std::set<int> ids;
    for (const auto & r : j.at("rsus")) {
      RsuInfo info;
      info.id = r.at("id").get<int>();
      const auto p = r.at("position").get<std::vector<double>>();
      if (p.size() != 3) {
        throw ConfigError("manifest: RSU position needs three coordinates");
      }
      info.position = Vec3(p[0], p[1], p[2]);
      if (!ids.insert(info.id).second) {
        throw ConfigError("manifest: duplicate RSU id " + std::to_string(info.id));
      }
      m.rsus.push_back(info);
    }
    for (const auto & f : j.at("frames")) {
      ManifestFrame mf;
      mf.timestep = f.at("timestep").get<int>();
      mf.timestamp = f.at("timestamp").get<double>();
      for (const auto & c : f.at("clouds")) {
        const int rsu = c.at("rsu").get<int>();
        if (!ids.count(rsu)) {
          throw ConfigError("manifest: frame " + std::to_string(mf.timestep) + " references unknown RSU " +
                            std::to_string(rsu));
        }
        mf.clouds.emplace_back(rsu, c.at("path").get<std::string>());
      }
      if (!m.frames.empty() &&
          (mf.timestep <= m.frames.back().timestep || !(mf.timestamp > m.frames.back().timestamp)))
      {
        throw ConfigError("manifest: timesteps and timestamps must strictly increase");
      }
      m.frames.push_back(std::move(mf));
    }
    if (j.contains("ground_truth")) {
      m.ground_truth = j["ground_truth"].get<std::string>();
    }
  } catch (const nlohmann::json::exception & e) {
    throw ParseError(K::kSyntax, std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const std::filesystem::path & path, const Manifest & manifest)
{
  write_file(path, format_manifest(manifest));
}

Manifest read_manifest(const std::filesystem::path & path)
{
  Manifest m = parse_manifest(read_file(path));
  const auto dir = path.parent_path();
  auto check = [&](const std::string & rel) {
    if (!std::filesystem::exists(dir / rel)) {
      throw ConfigError("manifest references missing file '" + (dir / rel).string() + "'");
    }
  };
  for (const auto & f : m.frames) {
    for (const auto & c : f.clouds) {
      check(c.second);
    }
  }
  if (m.ground_truth) {
    check(*m.ground_truth);
  }
  return m;
}

}  // namespace rsulabel
