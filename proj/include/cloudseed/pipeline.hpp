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

#ifndef CLOUDSEED__PIPELINE_HPP_
#define CLOUDSEED__PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cloudseed/eval.hpp"
#include "cloudseed/job_config.hpp"
#include "cloudseed/segmentation.hpp"

namespace cloudseed::server
{

/// Writes `count` synthetic scenes named <prefix>_NNNN. Each scene seed derives from the job
/// seed, the prefix and the index, so different prefixes give disjoint scene sets.
std::vector<std::string> run_synth(
  const JobConfig & config, const std::filesystem::path & out_dir, std::size_t count, const std::string & prefix);

struct IngestPaths
{
  std::filesystem::path velodyne;  // NNNNNN.bin
  std::filesystem::path labels;    // NNNNNN.txt; optional
  std::filesystem::path calib;     // NNNNNN.txt
  std::filesystem::path split;     // one frame id per line; empty: every velodyne file
};

/// Converts KITTI frames to camera-frame scenes. Objects outside the annotated categories are
/// dropped.
std::vector<std::string> run_ingest(
  const JobConfig & config, const IngestPaths & paths, const std::filesystem::path & out_dir);

/// One simulated click per instance with at least kMinInstancePoints points. Instances of a
/// scene share its split: `split` when given, otherwise "val" for a seeded val_fraction share
/// of scenes and "train" for the rest.
std::vector<segmentation::ManifestRecord> run_simulate_clicks(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::string & split = {});

struct StageReport
{
  std::map<std::string, std::size_t> counts;
  std::map<std::string, double> values;
};

/// Trains one segmentation model per category: seg_<category>.csnn plus history files.
StageReport run_train_seg(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & manifest,
  const std::filesystem::path & out_dir, std::ostream & log);

/// Trains the T-Net and box network on gt instance points: tnet.csnn, boxnet.csnn,
/// templates.json plus history files.
StageReport run_train_box(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & manifest,
  const std::filesystem::path & out_dir, std::ostream & log);

/// Segments and boxes every click. `clicks` is a manifest or a click database; clicks whose
/// segmentation yields no foreground produce no detection and are reported on `log`.
std::vector<eval::DetectionResult> run_infer(
  const JobConfig & config, const std::filesystem::path & scene_dir, const std::filesystem::path & clicks,
  const std::filesystem::path & seg_dir, const std::filesystem::path & box_dir, std::ostream & log);

/// Metrics over every scene in `scene_dir`. Ground truth is limited to clickable instances
/// (at least kMinInstancePoints points).
std::map<Category, eval::ClassMetrics> run_evaluate(
  const JobConfig & config, const std::filesystem::path & scene_dir,
  const std::vector<eval::DetectionResult> & results);

/// Click lines of a manifest or a click database (live records only).
std::vector<segmentation::Click> load_clicks(const std::filesystem::path & path);

}  // namespace cloudseed::server

#endif  // CLOUDSEED__PIPELINE_HPP_
