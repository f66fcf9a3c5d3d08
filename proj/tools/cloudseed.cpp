// Copyright 2026 The CloudSeed Authors
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

#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cloudseed/error.hpp"
#include "cloudseed/eval.hpp"
#include "cloudseed/http_server.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/job_config.hpp"
#include "cloudseed/pipeline.hpp"
#include "cloudseed/platform.hpp"
#include "cloudseed/service.hpp"

namespace fs = std::filesystem;
using namespace cloudseed;
using cloudseed::server::JobConfig;

namespace
{

struct Options
{
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::string category;

  std::size_t scenes{0};
  std::string prefix{"scene"};
  std::string split;
  fs::path scene_dir;
  fs::path kitti_root;
  server::IngestPaths ingest;
  fs::path manifest;
  fs::path clicks;
  fs::path seg_models;
  fs::path box_models;
  fs::path results;
  fs::path timings;
  fs::path click_db;
  fs::path timing_log;
  std::string host;
  int port{-1};
  fs::path out;
};

JobConfig job_config(const Options & o)
{
  JobConfig config = server::load_job_config(o.config);
  if (o.seed) {
    config.seed = *o.seed;
  }
  if (!o.category.empty()) {
    if (o.category == "all") {
      config.category.reset();
    } else {
      config.category = category_from_string(o.category);
      if (!config.category) {
        throw Error(ErrorKind::kConfig, "unknown category '" + o.category + "'");
      }
    }
  }
  config.validate();
  return config;
}

/// The flag value, else the config path of the same name.
fs::path path_or_config(const fs::path & flag, const JobConfig & config, const std::string & key, const std::string & flag_name)
{
  if (!flag.empty()) {
    return flag;
  }
  if (const auto it = config.paths.find(key); it != config.paths.end() && !it->second.empty()) {
    return it->second;
  }
  throw Error(ErrorKind::kParameter, "missing " + flag_name + " (or paths." + key + " in the config)");
}

void print_metrics(const std::map<Category, eval::ClassMetrics> & metrics)
{
  std::cout << eval::metrics_csv(metrics);
}

int run_serve(const JobConfig & config, const Options & o)
{
  server::ServiceConfig sc;
  sc.scene_dir = path_or_config(o.scene_dir.empty() ? config.server.scene_dir : o.scene_dir, config, "scenes", "--scenes");
  sc.training_pool = config.server.training_pool;
  sc.golden_pool = config.server.golden_pool;
  sc.annotation_pool = config.server.annotation_pool;
  sc.click_db = o.click_db.empty() ? config.server.click_db : o.click_db;
  sc.timing_log = o.timing_log.empty() ? config.server.timing_log : o.timing_log;
  sc.category = config.category.value_or(Category::kCar);
  sc.qa = config.qa;
  sc.seed = config.stream("serve");
  server::fill_default_pools(sc);

  server::AnnotationService service(sc);
  server::HttpServer http(service);
  const std::string host = o.host.empty() ? config.server.host : o.host;
  const int port = http.bind(host, o.port >= 0 ? o.port : config.server.port);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int received = 0;
    sigwait(&signals, &received);
    http.stop();
  });

  std::cerr << "serving " << sc.scene_dir.string() << " on http://" << host << ":" << port << " ("
            << sc.training_pool.size() << " training, " << sc.golden_pool.size() << " golden, "
            << sc.annotation_pool.size() << " annotation scenes)\n";
  http.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  tune_allocator();

  CLI::App app{"cloudseed: click-based 3D annotation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "JSON job config (default: $CLOUDSEED_CONFIG, else built-in desk-scale settings)");
  app.add_option("--seed", o.seed, "Seed of every random choice");
  app.add_option("--category", o.category, "Restrict to one category (car, pedestrian, cyclist) or 'all'");

  auto * synth = app.add_subcommand("synth", "Generate synthetic scenes");
  synth->add_option("--scenes", o.scenes, "Number of scenes")->required();
  synth->add_option("--prefix", o.prefix, "Scene id prefix; also selects the scene seed stream")->capture_default_str();
  synth->add_option("--out", o.out, "Output scene directory");

  auto * ingest = app.add_subcommand("ingest", "Convert KITTI frames to camera-frame scenes");
  ingest->add_option("--kitti", o.kitti_root, "KITTI object root with velodyne/, label_2/ and calib/");
  ingest->add_option("--velodyne", o.ingest.velodyne, "Velodyne directory (overrides --kitti)");
  ingest->add_option("--labels", o.ingest.labels, "Label directory (overrides --kitti)");
  ingest->add_option("--calib", o.ingest.calib, "Calibration directory (overrides --kitti)");
  ingest->add_option("--split", o.ingest.split, "File listing frame ids, one per line");
  ingest->add_option("--out", o.out, "Output scene directory");

  auto * simulate = app.add_subcommand("simulate-clicks", "Simulate one annotator click per instance");
  simulate->add_option("--scenes", o.scene_dir, "Scene directory");
  simulate->add_option("--split", o.split, "Split of every record (default: seeded train/val by scene)");
  simulate->add_option("--out", o.out, "Output manifest (JSON lines)");

  auto * train_seg = app.add_subcommand("train-seg", "Train one segmentation model per category");
  train_seg->add_option("--scenes", o.scene_dir, "Scene directory");
  train_seg->add_option("--manifest", o.manifest, "Click manifest");
  train_seg->add_option("--out", o.out, "Model directory");

  auto * train_box = app.add_subcommand("train-box", "Train the centroid and box networks");
  train_box->add_option("--scenes", o.scene_dir, "Scene directory");
  train_box->add_option("--manifest", o.manifest, "Click manifest");
  train_box->add_option("--out", o.out, "Model directory");

  auto * infer = app.add_subcommand("infer", "Segment and box every click");
  infer->add_option("--scenes", o.scene_dir, "Scene directory");
  infer->add_option("--clicks", o.clicks, "Click manifest or click database");
  infer->add_option("--seg-models", o.seg_models, "Directory of segmentation models");
  infer->add_option("--box-models", o.box_models, "Directory of box models");
  infer->add_option("--out", o.out, "Output results (JSON lines)");

  auto * evaluate = app.add_subcommand("evaluate", "Per-category metrics against scene ground truth");
  evaluate->add_option("--scenes", o.scene_dir, "Scene directory");
  evaluate->add_option("--results", o.results, "Results (JSON lines)");
  evaluate->add_option("--out", o.out, "Output directory for metrics.csv and metrics.json");

  auto * timing = app.add_subcommand("timing-report", "Seconds per object by object count");
  timing->add_option("--timings", o.timings, "Timing log (JSON lines)");
  timing->add_option("--out", o.out, "Output directory for timing.csv and timing.svg");

  auto * serve = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve->add_option("--scenes", o.scene_dir, "Scene directory");
  serve->add_option("--click-db", o.click_db, "Click database (JSON lines)");
  serve->add_option("--timing-log", o.timing_log, "Timing log (JSON lines)");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port; 0 picks a free port");

  CLI11_PARSE(app, argc, argv);

  try {
    const JobConfig config = job_config(o);
    std::ostream & log = std::cerr;

    if (*synth) {
      const auto out = path_or_config(o.out, config, "scenes", "--out");
      const auto ids = server::run_synth(config, out, o.scenes, o.prefix);
      log << "synth: wrote " << ids.size() << " scenes to " << out.string() << "\n";
    } else if (*ingest) {
      server::IngestPaths paths = o.ingest;
      if (!o.kitti_root.empty()) {
        if (paths.velodyne.empty()) paths.velodyne = o.kitti_root / "velodyne";
        if (paths.labels.empty() && fs::exists(o.kitti_root / "label_2")) paths.labels = o.kitti_root / "label_2";
        if (paths.calib.empty()) paths.calib = o.kitti_root / "calib";
      }
      const auto out = path_or_config(o.out, config, "scenes", "--out");
      const auto ids = server::run_ingest(config, paths, out);
      log << "ingest: wrote " << ids.size() << " scenes to " << out.string() << "\n";
    } else if (*simulate) {
      const auto scenes = path_or_config(o.scene_dir, config, "scenes", "--scenes");
      const auto out = path_or_config(o.out, config, "manifest", "--out");
      const auto records = server::run_simulate_clicks(config, scenes, o.split);
      std::string text;
      for (const auto & r : records) {
        text += segmentation::manifest_line(r);
        text += '\n';
      }
      io::write_text(out, text);
      log << "simulate-clicks: wrote " << records.size() << " clicks to " << out.string() << "\n";
    } else if (*train_seg) {
      const auto scenes = path_or_config(o.scene_dir, config, "scenes", "--scenes");
      const auto manifest = path_or_config(o.manifest, config, "manifest", "--manifest");
      const auto out = path_or_config(o.out, config, "models", "--out");
      server::run_train_seg(config, scenes, manifest, out, log);
    } else if (*train_box) {
      const auto scenes = path_or_config(o.scene_dir, config, "scenes", "--scenes");
      const auto manifest = path_or_config(o.manifest, config, "manifest", "--manifest");
      const auto out = path_or_config(o.out, config, "models", "--out");
      server::run_train_box(config, scenes, manifest, out, log);
    } else if (*infer) {
      const auto scenes = path_or_config(o.scene_dir, config, "scenes", "--scenes");
      const auto clicks = path_or_config(o.clicks, config, "clicks", "--clicks");
      const auto seg_models = path_or_config(o.seg_models, config, "models", "--seg-models");
      const auto box_models = path_or_config(o.box_models, config, "models", "--box-models");
      const auto out = path_or_config(o.out, config, "results", "--out");
      const auto results = server::run_infer(config, scenes, clicks, seg_models, box_models, log);
      io::write_text(out, eval::results_jsonl(results));
      log << "infer: wrote " << results.size() << " detections to " << out.string() << "\n";
    } else if (*evaluate) {
      const auto scenes = path_or_config(o.scene_dir, config, "scenes", "--scenes");
      const auto results_path = path_or_config(o.results, config, "results", "--results");
      const auto out = path_or_config(o.out, config, "out", "--out");
      const auto results = eval::parse_results_jsonl(io::read_text(results_path));
      const auto metrics = server::run_evaluate(config, scenes, results);
      io::write_text(out / "metrics.csv", eval::metrics_csv(metrics));
      io::write_text(out / "metrics.json", eval::metrics_json(metrics).dump(2) + "\n");
      print_metrics(metrics);
    } else if (*timing) {
      const auto timings = path_or_config(o.timings, config, "timings", "--timings");
      const auto out = path_or_config(o.out, config, "out", "--out");
      std::vector<eval::SceneTiming> rows;
      std::istringstream in(io::read_text(timings));
      std::string line;
      std::size_t number = 0;
      while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
          continue;
        }
        try {
          rows.push_back(nlohmann::json::parse(line).get<eval::SceneTiming>());
        } catch (const nlohmann::json::exception & e) {
          throw Error(ErrorKind::kParse, "timings line " + std::to_string(number) + ": " + e.what());
        }
      }
      const auto report = eval::timing_report(rows);
      for (const auto & id : report.excluded) {
        log << "timing-report: scene " << id << " has no objects, excluded\n";
      }
      io::write_text(out / "timing.csv", eval::timing_csv(report));
      io::write_text(out / "timing.svg", eval::timing_svg(report));
      std::cout << eval::timing_csv(report);
    } else if (*serve) {
      return run_serve(config, o);
    }
  } catch (const Error & e) {
    std::cerr << "cloudseed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception & e) {
    std::cerr << "cloudseed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
