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

#ifndef CLOUDSEED__SEGMENTATION_HPP_
#define CLOUDSEED__SEGMENTATION_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/nn/network.hpp"
#include "cloudseed/nn/trainer.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::segmentation
{

struct Click
{
  std::string scene_id;
  Category category{Category::kCar};
  Point3 position;
  std::int64_t timestamp_ms{0};

  friend bool operator==(const Click &, const Click &) = default;
};

void to_json(nlohmann::json & j, const Click & c);
void from_json(const nlohmann::json & j, Click & c);

struct SegExampleMeta
{
  std::string scene_id;
  std::size_t instance{0};
  Point3 click;
  std::uint64_t seed{0};
};

struct SegExample
{
  nn::Matrix input_points;  // count x 3, centered on the click
  std::vector<int> labels;
  SegExampleMeta meta;
};

struct InstanceMask
{
  IndexSet source_indices;
  std::vector<double> foreground_confidence;
  Click click;

  double mean_confidence() const;
};

/// Minimum number of points a ground-truth box must hold to be used for training.
inline constexpr std::size_t kMinInstancePoints = 5;

/// Uniformly chosen scene point inside the box. Throws kInstanceTooSparse if there is none.
Click simulate_click(
  const PointCloud & scene, const GroundTruthObject & gt, std::uint64_t seed,
  const std::string & scene_id = {});

/// Crops the volume around `click`, labels points inside `gts[instance]` as foreground and
/// resamples to `count` points. Throws kLabelAmbiguity if the click is outside that box.
SegExample make_seg_example(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts, std::size_t instance,
  const Point3 & click, double k, std::size_t count, std::uint64_t seed);

/// As above, with the instance found from the click. A click inside no box, or inside boxes of
/// more than one instance, is a label-ambiguity error.
SegExample make_seg_example(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts, const Point3 & click, double k,
  std::size_t count, std::uint64_t seed);

struct InstanceReport
{
  std::vector<std::size_t> usable;
  std::vector<std::size_t> too_sparse;
};

InstanceReport classify_instances(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts,
  std::size_t min_points = kMinInstancePoints);

struct SegTrainOptions
{
  nn::TrainConfig train;
  nn::ArchDescriptor arch{nn::ArchDescriptor::segmentation()};
  bool augment_yaw{true};  // random rotation about the vertical axis through the click
};

void to_json(nlohmann::json & j, const SegTrainOptions & o);
void from_json(const nlohmann::json & j, SegTrainOptions & o);

struct SegTrainResult
{
  nn::ModelParams params;
  nn::TrainHistory history;
};

/// Trains one model. Throws kInsufficientData when either set is empty, kDivergence on a
/// non-finite loss.
SegTrainResult train_segmentation(
  const std::vector<SegExample> & train, const std::vector<SegExample> & validation,
  const SegTrainOptions & options);

/// One model per category present in `train`.
std::map<Category, SegTrainResult> train_segmentation(
  const std::map<Category, std::vector<SegExample>> & train,
  const std::map<Category, std::vector<SegExample>> & validation, const SegTrainOptions & options);

/// Mean per-point cross-entropy of the model on `examples` in eval mode.
double validation_loss(const nn::ModelParams & params, const std::vector<SegExample> & examples);

struct SegmentOptions
{
  std::size_t count{512};
  double threshold{0.5};
  std::uint64_t seed{0};
  double component_radius{0.0};  // > 0 keeps only the foreground component nearest the click
};

/// Segments the instance under the click. Every cropped point is scored: the patch is split into
/// chunks of `count` points, and points drawn more than once keep their highest probability.
/// With a positive `component_radius`, foreground points are linked when within that distance
/// and only the component holding the foreground point nearest the click is kept.
/// Throws kEmptyInstance when the volume is empty and BelowThresholdError when no point passes.
InstanceMask segment_instance(
  const nn::ModelParams & model, const PointCloud & scene, const Click & click, double k,
  const SegmentOptions & options = {});

/// A reference to one training example, stored one JSON object per line.
struct ManifestRecord
{
  std::string scene_id;
  std::size_t instance{0};
  Category category{Category::kCar};
  Point3 click;
  std::uint64_t seed{0};
  std::string split{"train"};

  friend bool operator==(const ManifestRecord &, const ManifestRecord &) = default;
};

std::string manifest_line(const ManifestRecord & record);
std::vector<ManifestRecord> parse_manifest(const std::string & text);

}  // namespace cloudseed::segmentation

#endif  // CLOUDSEED__SEGMENTATION_HPP_
