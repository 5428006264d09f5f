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


// rsulabel command-line tool.
//
// Exit status: 0 success, 1 runtime failure, 2 usage error, 3 configuration error,
// 4 malformed input file.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsulabel/config.hpp"
#include "rsulabel/error.hpp"
#include "rsulabel/io.hpp"
#include "rsulabel/pipeline.hpp"
#include "rsulabel/simulator.hpp"

namespace fs = std::filesystem;
using namespace rsulabel;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitParse = 4;

struct Globals
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool verbose = false;
};

class Timer
{
public:
  Timer(const Globals & g, std::string what) : on_(g.verbose), what_(std::move(what)) {}
  ~Timer()
  {
    if (on_) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
      std::fprintf(stderr, "[rsulabel] %s: %.2f s\n", what_.c_str(), s);
    }
  }

private:
  bool on_;
  std::string what_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

PipelineConfig effective_config(const Globals & g)
{
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
  }
  if (g.threads) {
    cfg.threads = *g.threads;
  }
  cfg.validate();
  return cfg;
}

void say(const Globals & g, const std::string & msg)
{
  if (g.verbose) {
    std::fprintf(stderr, "[rsulabel] %s\n", msg.c_str());
  }
}

void emit(const std::string & out, const std::string & text)
{
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file(out, text);
  }
}

Sequence simulated_sequence(const PipelineConfig & cfg, const Globals & g)
{
  if (!cfg.sim) {
    throw ConfigError("no input: give --manifest or a \"sim\" section in the config");
  }
  const SimConfig sc = resolve_sim(*cfg.sim, cfg.seed);
  const std::string id = cfg.sequence_id.empty() ? cfg.sim->preset : cfg.sequence_id;
  Timer t(g, "simulate");
  return sequence_from_simulation(sc, simulate(sc), id);
}

int run_guarded(const std::function<void()> & body)
{
  try {
    body();
    return kExitOk;
  } catch (const ConfigError & e) {
    std::fprintf(stderr, "rsulabel: configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const ParseError & e) {
    std::fprintf(stderr, "rsulabel: parse error: %s\n", e.what());
    return kExitParse;
  } catch (const std::exception & e) {
    std::fprintf(stderr, "rsulabel: error: %s\n", e.what());
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Auto-labeling of vehicles in roadside LiDAR sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", g.verbose, "Report warnings and stage timings on stderr");

  std::string out;
  std::string manifest;
  std::string labels;
  std::string gt;
  std::string preset;
  std::size_t from = 0;
  std::size_t to = 1;

  auto * sim = app.add_subcommand("simulate", "Render a simulator scene into a dataset directory");
  sim->add_option("--preset", preset, "Preset name (overrides the config)");
  sim->add_option("-o,--out", out, "Dataset directory")->required();

  auto * flow = app.add_subcommand("flow", "Scene flow statistics between two frames");
  flow->add_option("-m,--manifest", manifest, "Sequence manifest")->required()->check(CLI::ExistingFile);
  flow->add_option("--from", from, "Source frame index");
  flow->add_option("--to", to, "Target frame index");
  flow->add_option("-o,--out", out, "Output JSON (stdout by default)");

  auto * disc = app.add_subcommand("discover", "Multi-frame, multi-scale object discovery");
  disc->add_option("-m,--manifest", manifest, "Sequence manifest")->required()->check(CLI::ExistingFile);
  disc->add_option("-o,--out", out, "Output label file (stdout by default)");

  auto * track = app.add_subcommand("track", "Link discovered boxes into tracklets");
  track->add_option("-m,--manifest", manifest, "Sequence manifest")->required()->check(CLI::ExistingFile);
  track->add_option("-l,--labels", labels, "Discovered label file")->required()->check(CLI::ExistingFile);
  track->add_option("-o,--out", out, "Output label file (stdout by default)");

  auto * refine = app.add_subcommand("refine", "Refine tracklet dimensions and poses");
  refine->add_option("-m,--manifest", manifest, "Sequence manifest")->required()->check(CLI::ExistingFile);
  refine->add_option("-l,--labels", labels, "Tracked label file")->required()->check(CLI::ExistingFile);
  refine->add_option("-o,--out", out, "Output label file (stdout by default)");

  auto * eval = app.add_subcommand("eval", "Score labels against ground truth");
  eval->add_option("-l,--labels", labels, "Label file to score")->required()->check(CLI::ExistingFile);
  eval->add_option("-g,--gt", gt, "Ground-truth label file")->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--out", out, "Report JSON (the table goes to stdout)");

  auto * pipe = app.add_subcommand("pipeline", "Simulate or load, then discover, track, refine and eval");
  pipe->add_option("-m,--manifest", manifest, "Sequence manifest (otherwise the config's sim section)")
    ->check(CLI::ExistingFile);
  pipe->add_option("-o,--out", out, "Directory for stage outputs");

  auto * conf = app.add_subcommand("config", "Print the effective configuration");
  conf->add_option("-o,--out", out, "Output file (stdout by default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  return run_guarded([&] {
    const PipelineConfig cfg = effective_config(g);

    if (*sim) {
      SimSource source = cfg.sim.value_or(SimSource{});
      if (!preset.empty()) {
        source.preset = preset;
      }
      const SimConfig sc = resolve_sim(source, cfg.seed);
      const std::string id = cfg.sequence_id.empty() || !preset.empty() ? source.preset : cfg.sequence_id;
      Sequence seq;
      {
        Timer t(g, "simulate");
        seq = sequence_from_simulation(sc, simulate(sc), id);
      }
      const fs::path path = save_sequence(seq, out);
      std::cout << path.string() << "\n";
      return;
    }

    if (*conf) {
      emit(out, format_config(cfg));
      return;
    }

    if (*eval) {
      const LabelFile dets = read_labels(labels);
      const LabelFile truth = read_labels(gt);
      const EvalReport report = run_eval(dets, truth, cfg);
      if (!out.empty()) {
        write_file(out, format_report_json(report, dets.sequence_id, cfg.eval_iou));
      }
      std::cout << format_report_table(report);
      return;
    }

    if (*pipe) {
      const Sequence seq = manifest.empty() ? simulated_sequence(cfg, g) : load_sequence(manifest);
      PipelineResult res;
      {
        Timer t(g, "pipeline");
        res = run_pipeline(seq, cfg, out.empty() ? fs::path{} : fs::path{out});
      }
      if (res.report) {
        std::cout << format_report_table(*res.report);
      } else {
        std::cout << "no ground truth; wrote " << res.refined.frames.size() << " frames of labels\n";
      }
      return;
    }

    const Sequence seq = load_sequence(manifest);
    if (*flow) {
      emit(out, format_flow_json(run_flow(seq, from, to, cfg)));
    } else if (*disc) {
      std::vector<std::string> warnings;
      LabelFile result;
      {
        Timer t(g, "discover");
        result = run_discover(seq, cfg, &warnings);
      }
      for (const auto & w : warnings) {
        say(g, w);
      }
      emit(out, format_labels(result));
    } else if (*track) {
      emit(out, format_labels(run_track(seq, read_labels(labels), cfg)));
    } else if (*refine) {
      Timer t(g, "refine");
      emit(out, format_labels(run_refine(seq, read_labels(labels), cfg)));
    }
  });
}
