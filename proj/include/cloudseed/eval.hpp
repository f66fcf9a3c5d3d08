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

#ifndef CLOUDSEED__EVAL_HPP_
#define CLOUDSEED__EVAL_HPP_

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/segmentation.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::eval
{

struct DetectionResult
{
  std::string scene_id;
  Category category{Category::kCar};
  Box3D box;
  double score{0.0};
  segmentation::InstanceMask mask;
};

void to_json(nlohmann::json & j, const DetectionResult & d);
void from_json(const nlohmann::json & j, DetectionResult & d);

/// Ground-truth boxes of one category keyed by scene id.
using GroundTruthIndex = std::map<std::string, std::vector<Box3D>>;

/// 11-point interpolated AP with greedy matching.
///
/// Detections are ranked by descending score (ties by scene id, then input order within the
/// scene); each takes the highest-IoU unmatched gt of its scene with IoU >= threshold. The PR
/// curve has one point per distinct score. Zero detections or zero gt give 0.
double average_precision(std::span<const DetectionResult> dets, const GroundTruthIndex & gts, double iou_threshold);

struct ClassMetrics
{
  std::size_t n_instances{0};
  std::size_t n_detections{0};
  std::size_t n_matched{0};
  double mean_iiou{0.0};
  double mean_centroid_error_m{0.0};
  double std_centroid_error_m{0.0};
  double mean_box_iou{0.0};
  double iou_threshold{0.0};
  double ap_3d{0.0};
};

void to_json(nlohmann::json & j, const ClassMetrics & m);
void from_json(const nlohmann::json & j, ClassMetrics & m);

struct EvalScene
{
  std::string scene_id;
  PointCloud cloud;
  std::vector<GroundTruthObject> objects;
};

/// Car 0.5, pedestrian and cyclist 0.25.
std::map<Category, double> default_iou_thresholds();

/// Per-category metrics for every category present in gt or detections.
///
/// Error columns use mask matching: in score order each detection takes the unmatched gt of its
/// scene and category whose point set has the highest instance IoU (> 0) with the mask.
/// Detections without mask points fall back to box IoU (> 0). Unmatched gt count only in AP.
std::map<Category, ClassMetrics> evaluate_pipeline(
  std::span<const DetectionResult> results, std::span<const EvalScene> scenes,
  const std::map<Category, double> & iou_thresholds);

std::string metrics_csv(const std::map<Category, ClassMetrics> & metrics);
nlohmann::json metrics_json(const std::map<Category, ClassMetrics> & metrics);

std::string results_jsonl(std::span<const DetectionResult> results);
std::vector<DetectionResult> parse_results_jsonl(const std::string & text);

struct SceneTiming
{
  std::string scene_id;
  int n_objects{0};
  double elapsed_s{0.0};
};

void to_json(nlohmann::json & j, const SceneTiming & t);
/// Accepts elapsed_s, or display_ms and submit_ms.
void from_json(const nlohmann::json & j, SceneTiming & t);

struct TimingBucket
{
  int n_objects{0};
  std::size_t scenes{0};
  double mean_seconds_per_object{0.0};
};

struct TimingReport
{
  std::vector<TimingBucket> buckets;  // ascending n_objects
  std::vector<std::pair<int, double>> per_scene;  // (n_objects, seconds per object)
  double total_seconds{0.0};
  long long total_objects{0};
  double overall_seconds_per_object{0.0};
  std::vector<std::string> excluded;  // scenes without objects
};

TimingReport timing_report(std::span<const SceneTiming> scenes);

std::string timing_csv(const TimingReport & report);
std::string timing_svg(const TimingReport & report);

}  // namespace cloudseed::eval

#endif  // CLOUDSEED__EVAL_HPP_
