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

#include "cloudseed/job_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "cloudseed/error.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::server
{
namespace
{

template <typename V>
nlohmann::json category_map_json(const std::map<Category, V> & m)
{
  nlohmann::json j = nlohmann::json::object();
  for (const auto & [c, v] : m) {
    j[std::string(to_string(c))] = v;
  }
  return j;
}

template <typename V>
std::map<Category, V> category_map_from_json(const nlohmann::json & j, const char * what)
{
  if (!j.is_object()) {
    throw Error(ErrorKind::kConfig, std::string(what) + " must be an object keyed by category");
  }
  std::map<Category, V> m;
  for (const auto & [name, value] : j.items()) {
    const auto c = category_from_string(name);
    if (!c) {
      throw Error(ErrorKind::kConfig, std::string(what) + ": unknown category '" + name + "'");
    }
    m[*c] = value.template get<V>();
  }
  return m;
}

std::vector<std::string> path_keys(const nlohmann::json & j)
{
  std::vector<std::string> keys;
  for (const auto & [k, v] : j.items()) {
    keys.push_back(k);
  }
  return keys;
}

std::filesystem::path resolve(const std::filesystem::path & base, const std::filesystem::path & p)
{
  if (p.empty() || p.is_absolute() || base.empty()) {
    return p;
  }
  return base / p;
}

}  // namespace

std::uint64_t name_hash(std::string_view name)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : name) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void to_json(nlohmann::json & j, const ServerConfig & c)
{
  j = {
    {"host", c.host},
    {"port", c.port},
    {"scene_dir", c.scene_dir.string()},
    {"training_pool", c.training_pool},
    {"golden_pool", c.golden_pool},
    {"annotation_pool", c.annotation_pool},
    {"click_db", c.click_db.string()},
    {"timing_log", c.timing_log.string()}};
}

void from_json(const nlohmann::json & j, ServerConfig & c)
{
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.scene_dir = j.value("scene_dir", c.scene_dir.string());
  c.training_pool = j.value("training_pool", c.training_pool);
  c.golden_pool = j.value("golden_pool", c.golden_pool);
  c.annotation_pool = j.value("annotation_pool", c.annotation_pool);
  c.click_db = j.value("click_db", c.click_db.string());
  c.timing_log = j.value("timing_log", c.timing_log.string());
}

JobConfig::JobConfig()
{
  seg.train.initial_lr = 0.01;
  seg.train.validate_every = 100;
  seg.train.early_stop_patience = 2'000;
  seg.train.batch_size = 32;

  box.train.initial_lr = 0.001;
  box.train.max_iters = 3'000;
  box.train.validate_every = 100;
  box.train.early_stop_patience = 2'000;
  box.train.batch_size = 32;
  box.count = 256;

  segment.count = 512;
  segment.threshold = 0.5;
  segment.component_radius = 0.3;

  iou_thresholds = {{Category::kCar, 0.5}, {Category::kPedestrian, 0.25}, {Category::kCyclist, 0.25}};
}

void JobConfig::validate() const
{
  const auto fail = [](const std::string & what) { throw Error(ErrorKind::kConfig, what); };
  try {
    qa.validate();
    seg.train.validate();
    seg.arch.validate();
    box.validate();
  } catch (const Error & e) {
    if (e.kind() == ErrorKind::kConfig) {
      throw;
    }
    fail(e.what());
  }
  for (const Category c : kAllCategories) {
    if (!k.contains(c) || !(k.at(c) > 0.0) || !std::isfinite(k.at(c))) {
      fail("k must be a positive size for every category");
    }
    if (!iou_thresholds.contains(c) || !(iou_thresholds.at(c) > 0.0) || iou_thresholds.at(c) > 1.0) {
      fail("iou_thresholds must lie in (0, 1] for every category");
    }
    if (seg_iterations.contains(c) && seg_iterations.at(c) <= 0) {
      fail("seg_iterations must be positive");
    }
  }
  if (seg_points == 0 || segment.count == 0) {
    fail("point counts must be positive");
  }
  if (!(segment.threshold > 0.0) || segment.threshold > 1.0) {
    fail("segment threshold must lie in (0, 1]");
  }
  if (!(segment.component_radius >= 0.0) || !std::isfinite(segment.component_radius)) {
    fail("segment component_radius must be non-negative");
  }
  if (!(val_fraction >= 0.0) || val_fraction >= 1.0) {
    fail("val_fraction must lie in [0, 1)");
  }
  if (server.port < 0 || server.port > 65535) {
    fail("server port out of range");
  }
}

std::vector<Category> JobConfig::categories() const
{
  if (category) {
    return {*category};
  }
  return {kAllCategories.begin(), kAllCategories.end()};
}

std::uint64_t JobConfig::stream(std::string_view name) const
{
  return Rng::derive(seed, name_hash(name));
}

void to_json(nlohmann::json & j, const JobConfig & c)
{
  nlohmann::json paths = nlohmann::json::object();
  for (const auto & [name, p] : c.paths) {
    paths[name] = p.string();
  }
  j = {
    {"seed", c.seed},
    {"category", c.category ? nlohmann::json(std::string(to_string(*c.category))) : nlohmann::json(nullptr)},
    {"synthetic", c.synthetic},
    {"qa", c.qa},
    {"k", category_map_json(c.k)},
    {"seg_points", c.seg_points},
    {"seg_iterations", category_map_json(c.seg_iterations)},
    {"seg", c.seg},
    {"segment",
     {{"count", c.segment.count},
      {"threshold", c.segment.threshold},
      {"component_radius", c.segment.component_radius}}},
    {"box", c.box},
    {"val_fraction", c.val_fraction},
    {"iou_thresholds", category_map_json(c.iou_thresholds)},
    {"templates", c.templates.string()},
    {"paths", paths},
    {"server", c.server}};
}

void from_json(const nlohmann::json & j, JobConfig & c)
{
  if (!j.is_object()) {
    throw Error(ErrorKind::kConfig, "config must be a JSON object");
  }
  // Merge onto the current values so partial sections keep their other defaults.
  nlohmann::json merged = c;
  const auto known = path_keys(merged);
  for (const auto & [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
    }
  }
  nlohmann::json patch = j;
  const bool all_categories = j.contains("category") && j.at("category").is_null();
  patch.erase("category");
  merged.merge_patch(patch);
  if (patch.contains("box") && patch["box"].contains("heading_bins") && !patch["box"].contains("box_arch")) {
    merged["box"].erase("box_arch");  // the output width follows the bin count
  }

  try {
    c.seed = merged.at("seed").get<std::uint64_t>();
    if (all_categories) {
      c.category.reset();
    } else if (j.contains("category")) {
      const auto name = j.at("category").get<std::string>();
      c.category = category_from_string(name);
      if (!c.category) {
        throw Error(ErrorKind::kConfig, "unknown category '" + name + "'");
      }
    }
    c.synthetic = merged.at("synthetic").get<pointcloud::SceneSpec>();
    c.qa = merged.at("qa").get<workflow::QAConfig>();
    c.k = category_map_from_json<double>(merged.at("k"), "k");
    c.seg_points = merged.at("seg_points").get<std::size_t>();
    c.seg_iterations = category_map_from_json<std::int64_t>(merged.at("seg_iterations"), "seg_iterations");
    c.seg = merged.at("seg").get<segmentation::SegTrainOptions>();
    c.segment.count = merged.at("segment").at("count").get<std::size_t>();
    c.segment.threshold = merged.at("segment").at("threshold").get<double>();
    c.segment.component_radius = merged.at("segment").at("component_radius").get<double>();
    c.box = merged.at("box").get<boxfit::BoxTrainOptions>();
    c.val_fraction = merged.at("val_fraction").get<double>();
    c.iou_thresholds = category_map_from_json<double>(merged.at("iou_thresholds"), "iou_thresholds");
    c.templates = merged.at("templates").get<std::string>();
    c.paths.clear();
    for (const auto & [name, p] : merged.at("paths").items()) {
      c.paths[name] = p.get<std::string>();
    }
    c.server = merged.at("server").get<ServerConfig>();
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  c.validate();
}

JobConfig load_job_config(const std::filesystem::path & path)
{
  std::filesystem::path file = path;
  if (file.empty()) {
    if (const char * env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
      file = env;
    }
  }
  JobConfig config;
  if (file.empty()) {
    return config;
  }
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorKind::kConfig, "config file " + file.string() + " does not exist");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(file));
  } catch (const nlohmann::json::parse_error & e) {
    throw Error(ErrorKind::kConfig, file.string() + ": " + e.what());
  }
  config = j.get<JobConfig>();

  const auto base = file.parent_path();
  config.templates = resolve(base, config.templates);
  for (auto & [name, p] : config.paths) {
    p = resolve(base, p);
  }
  config.server.scene_dir = resolve(base, config.server.scene_dir);
  config.server.click_db = resolve(base, config.server.click_db);
  config.server.timing_log = resolve(base, config.server.timing_log);
  return config;
}

}  // namespace cloudseed::server
