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

#ifndef CLOUDSEED__JOB_CONFIG_HPP_
#define CLOUDSEED__JOB_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/boxfit.hpp"
#include "cloudseed/patch.hpp"
#include "cloudseed/segmentation.hpp"
#include "cloudseed/synthetic.hpp"
#include "cloudseed/types.hpp"
#include "cloudseed/workflow.hpp"

namespace cloudseed::server
{

inline constexpr const char * kConfigEnv = "CLOUDSEED_CONFIG";

struct ServerConfig
{
  std::string host{"127.0.0.1"};
  int port{8080};
  std::filesystem::path scene_dir;
  std::vector<std::string> training_pool;  // scenes with gt used for annotator training
  std::vector<std::string> golden_pool;    // scenes with gt hidden in batches
  std::vector<std::string> annotation_pool;
  std::filesystem::path click_db{"clicks.jsonl"};
  std::filesystem::path timing_log{"timing.jsonl"};
};

void to_json(nlohmann::json & j, const ServerConfig & c);
void from_json(const nlohmann::json & j, ServerConfig & c);

/// Settings shared by every command. The defaults are the desk-scale configuration.
struct JobConfig
{
  std::uint64_t seed{7};
  std::optional<Category> category;  // unset: every category
  pointcloud::SceneSpec synthetic{pointcloud::SceneSpec::street()};
  workflow::QAConfig qa;
  pointcloud::VolumeSizes k{pointcloud::default_volume_sizes()};
  std::size_t seg_points{512};  // points per segmentation example
  std::map<Category, std::int64_t> seg_iterations{
    {Category::kCar, 800}, {Category::kPedestrian, 400}, {Category::kCyclist, 400}};
  segmentation::SegTrainOptions seg;
  segmentation::SegmentOptions segment;
  boxfit::BoxTrainOptions box;
  double val_fraction{0.1};  // share of scenes whose instances go to validation
  std::map<Category, double> iou_thresholds;
  std::filesystem::path templates;  // fixed templates file; empty: computed from training gt
  std::map<std::string, std::filesystem::path> paths;  // defaults for per-command data paths
  ServerConfig server;

  JobConfig();

  /// Throws kConfig.
  void validate() const;

  /// Categories a command works on.
  std::vector<Category> categories() const;

  /// Seed of the named sub-stream of this job.
  std::uint64_t stream(std::string_view name) const;
};

void to_json(nlohmann::json & j, const JobConfig & c);
/// Keys absent from `j` keep their defaults; unknown keys are a kConfig error.
void from_json(const nlohmann::json & j, JobConfig & c);

/// Reads `path`, or the file named by CLOUDSEED_CONFIG when `path` is empty, or returns the
/// defaults when neither is given. Relative paths inside the file resolve against its directory.
JobConfig load_job_config(const std::filesystem::path & path = {});

/// FNV-1a of a name, used to derive seed streams.
std::uint64_t name_hash(std::string_view name);

}  // namespace cloudseed::server

#endif  // CLOUDSEED__JOB_CONFIG_HPP_
