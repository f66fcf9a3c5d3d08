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

#ifndef CLOUDSEED__BOXFIT_HPP_
#define CLOUDSEED__BOXFIT_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "cloudseed/nn/network.hpp"
#include "cloudseed/nn/trainer.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::boxfit
{

inline constexpr int kNumTemplates = 4;
inline constexpr int kDefaultHeadingBins = 12;

struct Template
{
  Category category{Category::kCar};
  double h{1.0};
  double w{1.0};
  double l{1.0};

  friend bool operator==(const Template &, const Template &) = default;
};

/// Order: small car, large car, pedestrian, cyclist.
using TemplateSet = std::array<Template, kNumTemplates>;

/// Class means for pedestrians and cyclists; cars are split in two by 1-D k-means on length
/// (initialized at the shortest and longest car, clusters ordered by length).
TemplateSet compute_templates(const std::vector<GroundTruthObject> & training_gt);

nlohmann::json templates_json(const TemplateSet & templates);
TemplateSet templates_from_json(const nlohmann::json & j);

struct HeadingCode
{
  int bin{0};
  double residual{0.0};
};

/// Bin i is centered at i * 2pi / nh; the residual lies in (-width/2, width/2].
HeadingCode encode_heading(double ry, int nh);
double decode_heading(int bin, double residual, int nh);
double heading_bin_center(int bin, int nh);

/// Index ranges in the box network output.
struct OutputLayout
{
  int nh{kDefaultHeadingBins};

  static constexpr int centroid() { return 0; }
  static constexpr int template_scores() { return 3; }
  static constexpr int size_residuals() { return 3 + kNumTemplates; }  // template-major (h, w, l)
  int heading_scores() const { return size_residuals() + 3 * kNumTemplates; }
  int heading_residuals() const { return heading_scores() + nh; }
  int dim() const { return heading_residuals() + nh; }
};

struct BoxPrediction
{
  Box3D box;
  std::array<double, kNumTemplates> template_scores{};
  std::vector<double> heading_bin_scores;
  Point3 stage1_centroid;
  Point3 centroid_residual;
  std::vector<double> raw;  // box network output
  int template_index{0};
  int heading_bin{0};
  bool size_clamped{false};
};

struct BoxLossWeights
{
  double tnet_centroid{1.0};
  double box_centroid{1.0};
  double template_cls{1.0};
  double size_residual{1.0};
  double heading_cls{1.0};
  double heading_residual{2.0};

  void validate() const;
};

void to_json(nlohmann::json & j, const BoxLossWeights & w);
void from_json(const nlohmann::json & j, BoxLossWeights & w);

/// Instance mean plus the network residual; the network sees mean-centered points.
Point3 tnet_centroid(const nn::ModelParams & tnet, const nn::Matrix & mask_points);

/// Decodes the box network run on `mask_points - stage1`.
BoxPrediction box_estimate(
  const nn::ModelParams & boxnet, const nn::Matrix & mask_points, const Point3 & stage1,
  const TemplateSet & templates);

/// Decodes a raw box network output vector.
BoxPrediction decode_box(
  std::span<const double> raw, const Point3 & stage1, const TemplateSet & templates, int nh);

/// Template whose co-centered, co-oriented box has the highest IoU with `gt`; ties go to the
/// lower index.
int assign_gt_template(const Box3D & gt, const TemplateSet & templates);

struct BoxLossBreakdown
{
  double tnet_centroid{0.0};
  double box_centroid{0.0};
  double template_cls{0.0};
  double size_residual{0.0};
  double heading_cls{0.0};
  double heading_residual{0.0};
  double total{0.0};
};

/// Unweighted terms and their weighted sum.
BoxLossBreakdown box_loss(
  const BoxPrediction & pred, const Box3D & gt, const TemplateSet & templates,
  const BoxLossWeights & weights);

struct BoxLossGradient
{
  double loss{0.0};
  std::vector<double> d_raw;   // with respect to the box network output
  Point3 d_stage1;             // with respect to the stage-one centroid, holding raw fixed
};

BoxLossGradient box_loss_gradient(
  std::span<const double> raw, const Point3 & stage1, const Box3D & gt, const TemplateSet & templates,
  const BoxLossWeights & weights, int nh);

struct BoxExample
{
  nn::Matrix points;  // camera frame
  Box3D box;
  Category category{Category::kCar};
  nn::Matrix distractors;  // non-instance points around the instance, camera frame; may be empty
};

/// Simulated segmentation errors: with probability `probability` an example receives a contiguous
/// blob of up to `max_fraction` times its point count, taken from its distractors around a random
/// anchor.
struct MaskNoise
{
  double probability{0.0};
  double max_fraction{0.25};

  void validate() const;
};

void to_json(nlohmann::json & j, const MaskNoise & n);
void from_json(const nlohmann::json & j, MaskNoise & n);

/// Appends the blob described by `noise` to `example.points` (no-op when it draws no blob or
/// there are no distractors).
void add_mask_noise(BoxExample & example, const MaskNoise & noise, Rng & rng);

struct BoxTrainOptions
{
  nn::TrainConfig train;
  nn::ArchDescriptor tnet_arch{nn::ArchDescriptor::vector_head(3)};
  nn::ArchDescriptor box_arch{nn::ArchDescriptor::vector_head(OutputLayout{}.dim())};
  int nh{kDefaultHeadingBins};
  BoxLossWeights weights;
  std::size_t count{512};
  bool augment_rotation{true};  // rotate example and box about the sensor's vertical axis
  MaskNoise mask_noise;         // applied to training examples and, with a fixed seed, to validation

  void validate() const;
};

void to_json(nlohmann::json & j, const BoxTrainOptions & o);
void from_json(const nlohmann::json & j, BoxTrainOptions & o);

struct BoxTrainResult
{
  nn::ModelParams tnet;
  nn::ModelParams boxnet;
  nn::TrainHistory history;
};

/// Joint loss of both stages on one example, in eval mode; `seed` selects the point resample.
double pipeline_loss(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, const BoxExample & example,
  const TemplateSet & templates, const BoxTrainOptions & options, std::uint64_t seed);

/// Gradient of `pipeline_loss` with respect to both parameter vectors (the stage-one centroid
/// feeds the box network input, so the T-Net receives gradient through it as well).
struct PipelineGradient
{
  double loss{0.0};
  std::vector<double> tnet;
  std::vector<double> boxnet;
};

PipelineGradient pipeline_gradient(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, std::span<const BoxExample> batch,
  const TemplateSet & templates, const BoxTrainOptions & options, bool train_mode, std::uint64_t seed);

BoxTrainResult train_boxfit(
  const std::vector<BoxExample> & train, const std::vector<BoxExample> & validation,
  const TemplateSet & templates, const BoxTrainOptions & options);

/// Fixed-size network input drawn from `points`.
nn::Matrix resample(const nn::Matrix & points, std::size_t count, std::uint64_t seed);

/// Full two-stage inference on a mask.
BoxPrediction estimate_box(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, const nn::Matrix & mask_points,
  const TemplateSet & templates, std::size_t count, std::uint64_t seed = 0);

}  // namespace cloudseed::boxfit

#endif  // CLOUDSEED__BOXFIT_HPP_
