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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "rsulabel/config.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/io.hpp"
#include "rsulabel/pipeline.hpp"

using namespace rsulabel;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string & name)
{
  const fs::path dir = fs::temp_directory_path() / "rsulabel_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PointSet random_points(std::size_t n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-80.0f, 80.0f);
  PointSet pts(n);
  for (auto & p : pts) {
    p = Vec3(u(rng), u(rng), u(rng));
  }
  return pts;
}

ParseError::Kind parse_kind(const std::string & bytes)
{
  try {
    decode_cloud(bytes);
  } catch (const ParseError & e) {
    return e.kind();
  }
  FAIL("decode_cloud accepted malformed input");
  return ParseError::Kind::kSyntax;
}

std::string label_error(const std::string & text)
{
  try {
    parse_labels(text);
  } catch (const ParseError & e) {
    return e.what();
  }
  return {};
}

const std::string kHeader =
  "# rsulabel labels\nversion 1\nsequence demo\ncolumns track_id cx cy cz w l h theta vx vy stage\n";

}  // namespace

TEST_CASE("cloud round trip is bit-exact")
{
  const PointSet pts = random_points(1000, 11);
  const std::string bytes = encode_cloud(pts);
  CHECK(bytes.size() == kCloudHeaderBytes + 12 * pts.size());
  CHECK(bytes.substr(0, 8) == "RSUCLOUD");
  const PointSet back = decode_cloud(bytes);
  REQUIRE(back.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(std::memcmp(back[i].data(), pts[i].data(), sizeof(double) * 3) == 0);
  }

  const fs::path dir = scratch("cloud");
  write_cloud(dir / "a.bin", pts);
  CHECK(read_file(dir / "a.bin") == bytes);
  CHECK(read_cloud(dir / "a.bin") == back);
}

TEST_CASE("empty cloud")
{
  const std::string bytes = encode_cloud(PointSet{});
  CHECK(bytes.size() == kCloudHeaderBytes);
  CHECK(decode_cloud(bytes).empty());
}

TEST_CASE("malformed clouds")
{
  using K = ParseError::Kind;
  const std::string good = encode_cloud(random_points(10, 3));
  CHECK(parse_kind(good.substr(0, good.size() - 12)) == K::kTruncated);
  CHECK(parse_kind(good.substr(0, good.size() - 5)) == K::kTruncated);
  CHECK(parse_kind(good.substr(0, 15)) == K::kTruncated);
  CHECK(parse_kind("RSUCLOUX" + good.substr(8)) == K::kBadMagic);
  CHECK(parse_kind("") == K::kBadMagic);
  CHECK(parse_kind(good + std::string(24, '\0')) == K::kCountMismatch);
  std::string v2 = good;
  v2[8] = 2;
  CHECK(parse_kind(v2) == K::kBadVersion);
}

TEST_CASE("label round trip")
{
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-60.0, 60.0);
  std::uniform_real_distribution<double> ext(0.5, 15.0);
  std::uniform_real_distribution<double> yaw(-3.14159, 3.14159);
  LabelFile f;
  f.sequence_id = "round_trip";
  for (int t = 0; t < 5; ++t) {
    LabelFrame fr;
    fr.timestep = t * 2;
    fr.timestamp = 0.1 * t * 2;
    for (int i = 0; i < 10; ++i) {
      LabelRecord r;
      r.track_id = i % 3 == 0 ? -1 : i;
      r.box = {pos(rng), pos(rng), pos(rng) / 30.0, ext(rng), ext(rng), ext(rng) / 4.0, yaw(rng), pos(rng) / 5.0,
               pos(rng) / 5.0};
      r.stage = static_cast<Stage>(i % 4);
      fr.labels.push_back(r);
    }
    f.frames.push_back(fr);
  }
  const std::string text = format_labels(f);
  const LabelFile back = parse_labels(text);
  CHECK(back.sequence_id == f.sequence_id);
  REQUIRE(back.frames.size() == f.frames.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < f.frames.size(); ++t) {
    CHECK(back.frames[t].timestep == f.frames[t].timestep);
    REQUIRE(back.frames[t].labels.size() == f.frames[t].labels.size());
    for (std::size_t i = 0; i < f.frames[t].labels.size(); ++i) {
      const auto & a = f.frames[t].labels[i];
      const auto & b = back.frames[t].labels[i];
      CHECK(a.track_id == b.track_id);
      CHECK(a.stage == b.stage);
      const double da[] = {a.box.cx, a.box.cy, a.box.cz, a.box.w, a.box.l, a.box.h, a.box.theta, a.box.vx, a.box.vy};
      const double db[] = {b.box.cx, b.box.cy, b.box.cz, b.box.w, b.box.l, b.box.h, b.box.theta, b.box.vx, b.box.vy};
      for (int k = 0; k < 9; ++k) {
        worst = std::max(worst, std::abs(da[k] - db[k]));
      }
    }
  }
  CHECK(worst < 5e-7);
  CHECK(format_labels(back) == text);
  CHECK(back.find(4) != nullptr);
  CHECK(back.find(3) == nullptr);
}

TEST_CASE("header-only label file")
{
  const LabelFile f = parse_labels(kHeader);
  CHECK(f.sequence_id == "demo");
  CHECK(f.frames.empty());
  CHECK(format_labels(f) == kHeader);
}

TEST_CASE("label parse errors")
{
  const std::string extra =
    "# rsulabel labels\nversion 1\nsequence demo\ncolumns track_id cx cy cz w l h theta vx vy stage score\n";
  CHECK(label_error(extra).find("score") != std::string::npos);

  try {
    parse_labels("version 7\nsequence demo\ncolumns track_id cx cy cz w l h theta vx vy stage\n");
    FAIL("schema mismatch accepted");
  } catch (const ParseError & e) {
    CHECK(e.kind() == ParseError::Kind::kSchemaVersion);
    const std::string msg = e.what();
    CHECK(msg.find('7') != std::string::npos);
    CHECK(msg.find('1') != std::string::npos);
  }

  CHECK_THROWS_AS(parse_labels(kHeader + "frame 0 0.0 2\n1 0 0 0 2 4 1.5 0 0 0 refined\n"), ParseError);
  CHECK_THROWS_AS(parse_labels(kHeader + "frame 0 0.0 1\n1 0 0 0 2 4 1.5 0 0 0 painted\n"), ParseError);
  CHECK_THROWS_AS(parse_labels(kHeader + "frame 0 0.0 1\n1 0 0 0 2 4 1.5 0 0 refined\n"), ParseError);
  CHECK_THROWS_AS(parse_labels(kHeader + "frame 0 0.0 0\nframe 0 0.1 0\n"), ParseError);
  CHECK_THROWS_AS(parse_labels(kHeader + "frame 0 abc 0\n"), ParseError);

  LabelFile bad;
  bad.sequence_id = "two words";
  CHECK_THROWS_AS(format_labels(bad), ParameterError);
}

TEST_CASE("stage names")
{
  for (Stage s : {Stage::kDiscovered, Stage::kTracked, Stage::kRefined, Stage::kGroundTruth}) {
    CHECK(parse_stage(stage_name(s)) == s);
  }
  CHECK(stage_name(Stage::kGroundTruth) == "ground_truth");
  CHECK_THROWS_AS(parse_stage("final"), ParseError);
}

TEST_CASE("manifest round trip")
{
  Manifest m;
  m.sequence_id = "demo";
  m.rsus = {{0, Vec3(1.0, 2.0, 4.5)}, {3, Vec3(-20.0, 0.5, 5.0)}};
  for (int t = 0; t < 3; ++t) {
    ManifestFrame f;
    f.timestep = t;
    f.timestamp = 0.1 * t;
    f.clouds = {{0, "clouds/" + std::to_string(t) + "_rsu0.bin"}, {3, "clouds/" + std::to_string(t) + "_rsu3.bin"}};
    m.frames.push_back(f);
  }
  m.ground_truth = "ground_truth.labels";
  const std::string text = format_manifest(m);
  const Manifest back = parse_manifest(text);
  CHECK(back.sequence_id == m.sequence_id);
  REQUIRE(back.rsus.size() == 2);
  CHECK(back.rsus[1].id == 3);
  CHECK(back.rsus[1].position.isApprox(m.rsus[1].position));
  REQUIRE(back.frames.size() == 3);
  CHECK(back.frames[2].clouds == m.frames[2].clouds);
  CHECK(back.frames[2].timestamp == doctest::Approx(0.2));
  CHECK(back.ground_truth == m.ground_truth);
  CHECK(format_manifest(back) == text);

  Manifest unknown = m;
  unknown.frames[1].clouds[0].first = 9;
  CHECK_THROWS_AS(parse_manifest(format_manifest(unknown)), ConfigError);
  Manifest order = m;
  order.frames[2].timestep = 1;
  CHECK_THROWS_AS(parse_manifest(format_manifest(order)), ConfigError);
  CHECK_THROWS_AS(parse_manifest("{\"format\": "), ParseError);

  const fs::path dir = scratch("manifest");
  write_manifest(dir / "manifest.json", m);
  CHECK_THROWS_AS(read_manifest(dir / "manifest.json"), ConfigError);
}

TEST_CASE("config round trip and errors")
{
  PipelineConfig c;
  c.sequence_id = "cfg";
  c.seed = 42;
  c.threads = 3;
  c.sim = SimSource{"intersection", 7, 12};
  c.discovery.history_frames = 1;
  c.discovery.scales = {1.0, 0.5};
  c.refinement.multi_hypothesis = false;
  c.eval_iou = 0.5;
  const std::string text = format_config(c);
  const PipelineConfig back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.seed == 42);
  REQUIRE(back.sim);
  CHECK(back.sim->vehicles == 7);
  CHECK(back.discovery.scales == std::vector<double>{1.0, 0.5});

  try {
    parse_config("{\"discovery\": {\"histroy_frames\": 2}}");
    FAIL("unknown key accepted");
  } catch (const ConfigError & e) {
    CHECK(std::string(e.what()).find("histroy_frames") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{\"seed\": \"zero\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"eval_iou\": 1.5}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"seed\": "), ParseError);

  const PipelineConfig d = load_config(fs::path(RSULABEL_SOURCE_DIR) / "fixtures" / "default.cfg");
  PipelineConfig stock;
  stock.sequence_id = "static_car";
  stock.sim = SimSource{};
  CHECK(format_config(d) == format_config(stock));
}

TEST_CASE("shipped configs load")
{
  for (const auto & entry : fs::directory_iterator(fs::path(RSULABEL_SOURCE_DIR) / "fixtures")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("stages chained by hand reproduce the pipeline")
{
  const PipelineConfig cfg = load_config(fs::path(RSULABEL_SOURCE_DIR) / "fixtures" / "crossing_pair.cfg");
  const SimConfig sc = resolve_sim(*cfg.sim, cfg.seed);
  const Sequence seq = sequence_from_simulation(sc, simulate(sc), cfg.sequence_id);

  const fs::path dir = scratch("chain");
  const fs::path manifest = save_sequence(seq, dir / "data");
  const Sequence loaded = load_sequence(manifest);
  REQUIRE(loaded.frames.size() == seq.frames.size());
  const auto & a = loaded.frames[3].clouds[0].points;
  const auto & b = seq.frames[3].clouds[0].points;
  REQUIRE(a.size() == b.size());
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += a[i] == b[i].cast<float>().cast<double>();
  }
  CHECK(same == a.size());

  const PipelineResult res = run_pipeline(loaded, cfg, dir / "out");
  const LabelFile disc = parse_labels(format_labels(run_discover(loaded, cfg)));
  const LabelFile tracked = parse_labels(format_labels(run_track(loaded, disc, cfg)));
  const LabelFile refined = run_refine(loaded, tracked, cfg);
  CHECK(format_labels(disc) == read_file(dir / "out" / "discovered.labels"));
  CHECK(format_labels(tracked) == read_file(dir / "out" / "tracked.labels"));
  CHECK(format_labels(refined) == read_file(dir / "out" / "refined.labels"));
  CHECK(format_labels(res.refined) == format_labels(refined));
  CHECK(fs::exists(dir / "out" / "report.json"));
}
