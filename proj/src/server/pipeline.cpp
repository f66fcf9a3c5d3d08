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

#include "cloudseed/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "cloudseed/boxfit.hpp"
#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/kitti.hpp"
#include "cloudseed/nn/checkpoint.hpp"
#include "cloudseed/patch.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/scene_io.hpp"
#include "cloudseed/synthetic.hpp"
#include "cloudseed/workflow.hpp"

namespace cloudseed::server
{
namespace
{

using pointcloud::Scene;

std::string indexed_id(const std::string & prefix, std::size_t i)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04zu", i);
  return prefix + buf;
}

void require_dir(const std::filesystem::path & dir, const char * what)
{
  if (dir.empty() || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIo, std::string(what) + " directory '" + dir.string() + "' does not exist");
  }
}

void require_file(const std::filesystem::path & file, const char * what)
{
  if (file.empty() || !std::filesystem::is_regular_file(file)) {
    throw Error(ErrorKind::kIo, std::string(what) + " '" + file.string() + "' does not exist");
  }
}

class SceneCache
{
public:
  explicit SceneCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const Scene & get(const std::string & id)
  {
    auto it = scenes_.find(id);
    if (it == scenes_.end()) {
      it = scenes_.emplace(id, pointcloud::load_scene(dir_, id)).first;
    }
    return it->second;
  }

private:
  std::filesystem::path dir_;
  std::map<std::string, Scene> scenes_;
};

std::vector<segmentation::ManifestRecord> load_manifest(const std::filesystem::path & path)
{
  require_file(path, "manifest");
  return segmentation::parse_manifest(io::read_text(path));
}

nn::Matrix to_matrix(const std::vector<Point3> & points, const IndexSet & indices)
{
  nn::Matrix m(static_cast<Eigen::Index>(indices.size()), 3);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto & p = points.at(indices[r]);
    m(static_cast<Eigen::Index>(r), 0) = p.x;
    m(static_cast<Eigen::Index>(r), 1) = p.y;
    m(static_cast<Eigen::Index>(r), 2) = p.z;
  }
  return m;
}

bool wanted(const JobConfig & config, Category c)
{
  return !config.category || *config.category == c;
}

void write_history(const std::filesystem::path & dir, const std::string & stem, const nn::TrainHistory & history)
{
  io::write_text(dir / (stem + "_history.csv"), nn::history_csv(history));
  io::write_text(dir / (stem + "_history.json"), nn::history_json(history).dump(2) + "\n");
}

std::vector<std::string> read_split(const std::filesystem::path & split)
{
  std::vector<std::string> ids;
  std::istringstream in(io::read_text(split));
  std::string line;
  while (std::getline(in, line)) {
    line.erase(std::remove_if(line.begin(), line.end(), [](char ch) { return std::isspace(static_cast<unsigned char>(ch)); }), line.end());
    if (!line.empty()) {
      ids.push_back(line);
    }
  }
  return ids;
}

}  // namespace

std::vector<std::string> run_synth(
  const JobConfig & config, const std::filesystem::path & out_dir, std::size_t count, const std::string & prefix)
{
  if (prefix.empty()) {
    throw Error(ErrorKind::kParameter, "scene prefix must not be empty");
  }
  const std::uint64_t base = Rng::derive(config.stream("synth"), name_hash(prefix));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < count; ++i) {
    auto generated = pointcloud::synthetic_scene(config.synthetic, Rng::derive(base, i));
    Scene scene{indexed_id(prefix, i), std::move(generated.cloud), std::move(generated.objects)};
    pointcloud::save_scene(out_dir, scene);
    ids.push_back(scene.id);
  }
  return ids;
}

std::vector<std::string> run_ingest(
  const JobConfig & config, const IngestPaths & paths, const std::filesystem::path & out_dir)
{
  require_dir(paths.velodyne, "velodyne");
  require_dir(paths.calib, "calib");
  std::vector<std::string> ids;
  if (!paths.split.empty()) {
    require_file(paths.split, "split file");
    ids = read_split(paths.split);
  } else {
    for (const auto & entry : std::filesystem::directory_iterator(paths.velodyne)) {
      if (entry.path().extension() == ".bin") {
        ids.push_back(entry.path().stem().string());
      }
    }
    std::sort(ids.begin(), ids.end());
  }
  for (const auto & id : ids) {
    const auto raw = io::read_bytes(paths.velodyne / (id + ".bin"));
    const auto calib = pointcloud::parse_kitti_calib(io::read_text(paths.calib / (id + ".txt")));
    Scene scene{id, pointcloud::to_camera_frame(pointcloud::parse_velodyne_bin(raw), calib), {}};
    if (!paths.labels.empty()) {
      for (auto & o : pointcloud::parse_kitti_labels(io::read_text(paths.labels / (id + ".txt")))) {
        if (wanted(config, o.category)) {
          scene.objects.push_back(o);
        }
      }
    }
    pointcloud::save_scene(out_dir, scene);
  }
  return ids;
}

std::vector<segmentation::ManifestRecord> run_simulate_clicks(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::string & split)
{
  require_dir(scene_dir, "scene");
  const std::uint64_t click_base = config.stream("simulate-clicks");
  const std::uint64_t split_base = config.stream("split");
  std::vector<segmentation::ManifestRecord> records;
  for (const auto & id : pointcloud::list_scenes(scene_dir)) {
    const Scene scene = pointcloud::load_scene(scene_dir, id);
    const std::uint64_t scene_seed = Rng::derive(click_base, name_hash(id));
    std::string scene_split = split;
    if (scene_split.empty()) {
      Rng rng(Rng::derive(split_base, name_hash(id)));
      scene_split = rng.uniform() < config.val_fraction ? "val" : "train";
    }
    const auto report = segmentation::classify_instances(scene.cloud, scene.objects);
    for (const std::size_t i : report.usable) {
      const auto & gt = scene.objects[i];
      if (!wanted(config, gt.category)) {
        continue;
      }
      const std::uint64_t seed = Rng::derive(scene_seed, i);
      const auto click = segmentation::simulate_click(scene.cloud, gt, seed, id);
      records.push_back({id, i, gt.category, click.position, Rng::derive(seed, 1), scene_split});
    }
  }
  return records;
}

StageReport run_train_seg(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & manifest,
  const std::filesystem::path & out_dir, std::ostream & log)
{
  require_dir(scene_dir, "scene");
  const auto records = load_manifest(manifest);
  SceneCache scenes(scene_dir);
  std::map<Category, std::vector<segmentation::SegExample>> train;
  std::map<Category, std::vector<segmentation::SegExample>> validation;
  for (const auto & r : records) {
    if (!wanted(config, r.category) || (r.split != "train" && r.split != "val")) {
      continue;
    }
    const auto & scene = scenes.get(r.scene_id);
    auto example = segmentation::make_seg_example(
      scene.cloud, scene.objects, r.instance, r.click, config.k.at(r.category), config.seg_points, r.seed);
    (r.split == "train" ? train : validation)[r.category].push_back(std::move(example));
  }

  StageReport report;
  for (const Category c : config.categories()) {
    const std::string name(to_string(c));
    if (train[c].empty()) {
      log << "train-seg: no " << name << " training examples, skipped\n";
      continue;
    }
    segmentation::SegTrainOptions options = config.seg;
    if (config.seg_iterations.contains(c)) {
      options.train.max_iters = config.seg_iterations.at(c);
    }
    options.train.rng_seed = Rng::derive(config.stream("train-seg"), static_cast<std::uint64_t>(c));
    log << "train-seg: " << name << " " << train[c].size() << " train, " << validation[c].size()
        << " validation examples, " << options.train.max_iters << " iterations\n";
    const auto result = segmentation::train_segmentation(train[c], validation[c], options);
    nlohmann::json meta = {
      {"kind", "segmentation"},
      {"category", name},
      {"k", config.k.at(c)},
      {"points", config.seg_points},
      {"seed", config.seed},
      {"best_iteration", result.history.best_iteration}};
    nn::save_checkpoint(out_dir / ("seg_" + name + ".csnn"), result.params, meta);
    write_history(out_dir, "seg_" + name, result.history);
    report.counts[name + "_train"] = train[c].size();
    report.counts[name + "_validation"] = validation[c].size();
    report.values[name + "_best_validation_loss"] = result.history.best_validation_loss;
  }
  return report;
}

StageReport run_train_box(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & manifest,
  const std::filesystem::path & out_dir, std::ostream & log)
{
  require_dir(scene_dir, "scene");
  const auto records = load_manifest(manifest);
  SceneCache scenes(scene_dir);

  std::vector<std::string> train_scenes;
  std::vector<boxfit::BoxExample> train;
  std::vector<boxfit::BoxExample> validation;
  for (const auto & r : records) {
    if (r.split != "train" && r.split != "val") {
      continue;
    }
    if (r.split == "train") {
      train_scenes.push_back(r.scene_id);
    }
    if (!wanted(config, r.category)) {
      continue;
    }
    const auto & scene = scenes.get(r.scene_id);
    const auto & gt = scene.objects.at(r.instance);
    const auto members = geometry::points_in_box(scene.cloud, gt.box);
    boxfit::BoxExample example{to_matrix(scene.cloud.points, members), gt.box, gt.category, {}};
    if (config.box.mask_noise.probability > 0.0) {
      IndexSet others;
      for (const auto i : pointcloud::crop_volume(scene.cloud, r.click, config.k.at(r.category)).source_indices) {
        if (!std::binary_search(members.begin(), members.end(), i)) {
          others.push_back(i);
        }
      }
      example.distractors = to_matrix(scene.cloud.points, others);
    }
    (r.split == "train" ? train : validation).push_back(std::move(example));
  }

  boxfit::TemplateSet templates;
  if (!config.templates.empty()) {
    require_file(config.templates, "templates file");
    templates = boxfit::templates_from_json(nlohmann::json::parse(io::read_text(config.templates)));
  } else {
    std::sort(train_scenes.begin(), train_scenes.end());
    train_scenes.erase(std::unique(train_scenes.begin(), train_scenes.end()), train_scenes.end());
    std::vector<GroundTruthObject> gt;
    for (const auto & id : train_scenes) {
      const auto & objects = scenes.get(id).objects;
      gt.insert(gt.end(), objects.begin(), objects.end());
    }
    templates = boxfit::compute_templates(gt);
  }

  boxfit::BoxTrainOptions options = config.box;
  options.train.rng_seed = config.stream("train-box");
  log << "train-box: " << train.size() << " train, " << validation.size() << " validation examples, "
      << options.train.max_iters << " iterations\n";
  const auto result = boxfit::train_boxfit(train, validation, templates, options);

  const nlohmann::json meta = {
    {"kind", "box"},
    {"points", options.count},
    {"heading_bins", options.nh},
    {"seed", config.seed},
    {"best_iteration", result.history.best_iteration}};
  nn::save_checkpoint(out_dir / "tnet.csnn", result.tnet, meta);
  nn::save_checkpoint(out_dir / "boxnet.csnn", result.boxnet, meta);
  io::write_text(out_dir / "templates.json", boxfit::templates_json(templates).dump(2) + "\n");
  write_history(out_dir, "box", result.history);

  StageReport report;
  report.counts["train"] = train.size();
  report.counts["validation"] = validation.size();
  report.values["best_validation_loss"] = result.history.best_validation_loss;
  return report;
}

std::vector<segmentation::Click> load_clicks(const std::filesystem::path & path)
{
  require_file(path, "clicks file");
  const std::string text = io::read_text(path);
  const auto first_line = text.substr(0, text.find('\n'));
  std::vector<segmentation::Click> clicks;
  if (first_line.find("\"annotator_id\"") != std::string::npos) {
    const auto records = workflow::click_db_load(path);
    for (const auto & r : workflow::live_clicks(records)) {
      clicks.push_back({r.scene_id, r.category, r.position, r.timestamp_ms});
    }
    return clicks;
  }
  for (const auto & r : segmentation::parse_manifest(text)) {
    clicks.push_back({r.scene_id, r.category, r.click, 0});
  }
  return clicks;
}

std::vector<eval::DetectionResult> run_infer(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & clicks,
  const std::filesystem::path & seg_dir, const std::filesystem::path & box_dir, std::ostream & log)
{
  require_dir(scene_dir, "scene");
  require_dir(seg_dir, "segmentation model");
  require_dir(box_dir, "box model");

  const auto tnet = nn::load_checkpoint(box_dir / "tnet.csnn");
  const auto boxnet = nn::load_checkpoint(box_dir / "boxnet.csnn");
  const auto templates = boxfit::templates_from_json(nlohmann::json::parse(io::read_text(box_dir / "templates.json")));
  const std::size_t box_points = boxnet.metadata.value("points", config.box.count);

  std::map<Category, nn::Checkpoint> seg_models;
  const auto seg_model = [&](Category c) -> const nn::Checkpoint & {
    auto it = seg_models.find(c);
    if (it == seg_models.end()) {
      const auto path = seg_dir / ("seg_" + std::string(to_string(c)) + ".csnn");
      require_file(path, "segmentation model");
      it = seg_models.emplace(c, nn::load_checkpoint(path)).first;
    }
    return it->second;
  };

  SceneCache scenes(scene_dir);
  const std::uint64_t base = config.stream("infer");
  std::vector<eval::DetectionResult> results;
  const auto all = load_clicks(clicks);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto & click = all[i];
    if (!wanted(config, click.category)) {
      continue;
    }
    const auto & model = seg_model(click.category);
    const double k = model.metadata.value("k", config.k.at(click.category));
    const auto & scene = scenes.get(click.scene_id);
    const std::uint64_t seed = Rng::derive(base, i);
    segmentation::SegmentOptions options = config.segment;
    options.seed = seed;
    try {
      const auto mask = segmentation::segment_instance(model.params, scene.cloud, click, k, options);
      const auto points = to_matrix(scene.cloud.points, mask.source_indices);
      const auto box = boxfit::estimate_box(tnet.params, boxnet.params, points, templates, box_points, Rng::derive(seed, 1));
      results.push_back({click.scene_id, click.category, box.box, mask.mean_confidence(), mask});
    } catch (const Error & e) {
      if (e.kind() != ErrorKind::kBelowThreshold && e.kind() != ErrorKind::kEmptyInstance) {
        throw;
      }
      log << "infer: " << click.scene_id << " click " << i << ": no detection (" << e.what() << ")\n";
    }
  }
  return results;
}

std::map<Category, eval::ClassMetrics> run_evaluate(
  const JobConfig & config, const std::filesystem::path & scene_dir,
  const std::vector<eval::DetectionResult> & results)
{
  require_dir(scene_dir, "scene");
  std::vector<eval::EvalScene> scenes;
  for (const auto & id : pointcloud::list_scenes(scene_dir)) {
    auto scene = pointcloud::load_scene(scene_dir, id);
    const auto report = segmentation::classify_instances(scene.cloud, scene.objects);
    std::vector<GroundTruthObject> objects;
    for (const std::size_t i : report.usable) {
      if (wanted(config, scene.objects[i].category)) {
        objects.push_back(scene.objects[i]);
      }
    }
    scenes.push_back({id, std::move(scene.cloud), std::move(objects)});
  }
  std::vector<eval::DetectionResult> selected;
  for (const auto & r : results) {
    if (wanted(config, r.category)) {
      selected.push_back(r);
    }
  }
  return eval::evaluate_pipeline(selected, scenes, config.iou_thresholds);
}

}  // namespace cloudseed::server
