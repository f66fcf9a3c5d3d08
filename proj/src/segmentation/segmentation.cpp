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

#include "cloudseed/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/nn/loss.hpp"
#include "cloudseed/nn/sampling.hpp"
#include "cloudseed/patch.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::segmentation
{
namespace
{

constexpr std::uint64_t kBatchStream = 0x5e6b;
constexpr std::uint64_t kDropoutStream = 0xd409;
constexpr std::uint64_t kAugmentStream = 0xa06;

double foreground_probability(double background_logit, double foreground_logit)
{
  return 1.0 / (1.0 + std::exp(background_logit - foreground_logit));
}

nn::Matrix rotate_about_vertical(const nn::Matrix & points, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  nn::Matrix out = points;
  out.col(0) = c * points.col(0) + s * points.col(2);
  out.col(2) = -s * points.col(0) + c * points.col(2);
  return out;
}

}  // namespace

void to_json(nlohmann::json & j, const Click & c)
{
  j = {
    {"scene_id", c.scene_id},
    {"category", c.category},
    {"x", c.position.x},
    {"y", c.position.y},
    {"z", c.position.z},
    {"timestamp_ms", c.timestamp_ms}};
}

void from_json(const nlohmann::json & j, Click & c)
{
  c.scene_id = j.at("scene_id").get<std::string>();
  c.category = j.at("category").get<Category>();
  c.position = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
  c.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
  if (!c.position.finite()) {
    throw Error(ErrorKind::kParse, "click position must be finite");
  }
}

double InstanceMask::mean_confidence() const
{
  if (foreground_confidence.empty()) {
    return 0.0;
  }
  return std::accumulate(foreground_confidence.begin(), foreground_confidence.end(), 0.0) /
         static_cast<double>(foreground_confidence.size());
}

Click simulate_click(
  const PointCloud & scene, const GroundTruthObject & gt, std::uint64_t seed, const std::string & scene_id)
{
  const IndexSet inside = geometry::points_in_box(scene, gt.box);
  if (inside.empty()) {
    throw Error(ErrorKind::kInstanceTooSparse, "no scene points inside the ground-truth box");
  }
  Rng rng(seed);
  Click click;
  click.scene_id = scene_id;
  click.category = gt.category;
  click.position = scene.points[inside[rng.index(inside.size())]];
  return click;
}

SegExample make_seg_example(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts, std::size_t instance,
  const Point3 & click, double k, std::size_t count, std::uint64_t seed)
{
  if (instance >= gts.size()) {
    throw Error(ErrorKind::kParameter, "instance index out of range");
  }
  const Box3D & box = gts[instance].box;
  if (!geometry::contains(box, click)) {
    throw Error(ErrorKind::kLabelAmbiguity, "click lies outside the instance it is meant to seed");
  }
  const auto patch = pointcloud::crop_volume(scene, click, k);
  const auto sample = nn::sample_fixed_points(nn::to_matrix(patch.points), count, seed);
  SegExample example;
  example.input_points = sample.points;
  example.labels.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    const Point3 & p = scene.points[patch.source_indices[sample.index_map[r]]];
    example.labels.push_back(geometry::contains(box, p) ? 1 : 0);
  }
  example.meta = {{}, instance, click, seed};
  return example;
}

SegExample make_seg_example(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts, const Point3 & click, double k,
  std::size_t count, std::uint64_t seed)
{
  std::optional<std::size_t> owner;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (geometry::contains(gts[i].box, click)) {
      if (owner) {
        throw Error(ErrorKind::kLabelAmbiguity, "click lies inside more than one ground-truth box");
      }
      owner = i;
    }
  }
  if (!owner) {
    throw Error(ErrorKind::kLabelAmbiguity, "click lies inside no ground-truth box");
  }
  return make_seg_example(scene, gts, *owner, click, k, count, seed);
}

InstanceReport classify_instances(
  const PointCloud & scene, const std::vector<GroundTruthObject> & gts, std::size_t min_points)
{
  InstanceReport report;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto inside = geometry::points_in_box(scene, gts[i].box);
    (inside.size() >= min_points ? report.usable : report.too_sparse).push_back(i);
  }
  return report;
}

void to_json(nlohmann::json & j, const SegTrainOptions & o)
{
  j = {{"train", o.train}, {"arch", o.arch}, {"augment_yaw", o.augment_yaw}};
}

void from_json(const nlohmann::json & j, SegTrainOptions & o)
{
  if (j.contains("train")) {
    o.train = j.at("train").get<nn::TrainConfig>();
  }
  if (j.contains("arch")) {
    o.arch = j.at("arch").get<nn::ArchDescriptor>();
  }
  o.augment_yaw = j.value("augment_yaw", o.augment_yaw);
}

double validation_loss(const nn::ModelParams & params, const std::vector<SegExample> & examples)
{
  constexpr std::size_t kChunk = 32;
  double total = 0.0;
  std::size_t points = 0;
  for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
    const std::size_t end = std::min(examples.size(), begin + kChunk);
    std::vector<nn::Matrix> sets;
    std::vector<int> labels;
    for (std::size_t i = begin; i < end; ++i) {
      sets.push_back(examples[i].input_points);
      labels.insert(labels.end(), examples[i].labels.begin(), examples[i].labels.end());
    }
    const auto cache = nn::forward(params, nn::PointBatch::stack(sets), false, 0);
    total += nn::cross_entropy_per_point(cache.output, labels) * static_cast<double>(labels.size());
    points += labels.size();
  }
  return points == 0 ? 0.0 : total / static_cast<double>(points);
}

SegTrainResult train_segmentation(
  const std::vector<SegExample> & train, const std::vector<SegExample> & validation,
  const SegTrainOptions & options)
{
  if (train.empty() || validation.empty()) {
    throw Error(ErrorKind::kInsufficientData, "segmentation training needs training and validation examples");
  }
  if (options.arch.head != nn::HeadKind::kPerPointBinary) {
    throw Error(ErrorKind::kParameter, "segmentation needs the per-point binary head");
  }
  for (const auto & set : {&train, &validation}) {
    for (const auto & e : *set) {
      if (e.input_points.cols() != options.arch.input_dim ||
          static_cast<std::size_t>(e.input_points.rows()) != e.labels.size() || e.labels.empty()) {
        throw Error(ErrorKind::kDimension, "segmentation example points and labels disagree");
      }
    }
  }
  const nn::TrainConfig & config = options.train;
  nn::ModelParams model = nn::ModelParams::initialize(options.arch, config.rng_seed);

  const auto step = [&](std::int64_t iteration, std::span<const double> values, std::span<double> grad) {
    std::copy(values.begin(), values.end(), model.values.begin());
    Rng rng(Rng::derive(Rng::derive(config.rng_seed, kBatchStream), static_cast<std::uint64_t>(iteration)));
    Rng augment(Rng::derive(Rng::derive(config.rng_seed, kAugmentStream), static_cast<std::uint64_t>(iteration)));
    std::vector<nn::Matrix> sets;
    std::vector<int> labels;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const SegExample & e = train[rng.index(train.size())];
      sets.push_back(options.augment_yaw ? rotate_about_vertical(e.input_points, augment.uniform(-M_PI, M_PI))
                                         : e.input_points);
      labels.insert(labels.end(), e.labels.begin(), e.labels.end());
    }
    const auto cache = nn::forward(
      model, nn::PointBatch::stack(sets), true,
      Rng::derive(Rng::derive(config.rng_seed, kDropoutStream), static_cast<std::uint64_t>(iteration)));
    nn::Matrix d_output;
    const double loss = nn::cross_entropy_per_point(cache.output, labels, d_output);
    const auto g = nn::backward_from_output(model, cache, d_output);
    std::copy(g.params.begin(), g.params.end(), grad.begin());
    return loss;
  };
  const auto validate = [&](std::span<const double> values) {
    std::copy(values.begin(), values.end(), model.values.begin());
    return validation_loss(model, validation);
  };

  SegTrainResult result;
  std::vector<double> values = model.values;
  result.history = nn::run_training(config, values, step, validate);
  model.values = std::move(values);
  result.params = std::move(model);
  return result;
}

std::map<Category, SegTrainResult> train_segmentation(
  const std::map<Category, std::vector<SegExample>> & train,
  const std::map<Category, std::vector<SegExample>> & validation, const SegTrainOptions & options)
{
  std::map<Category, SegTrainResult> out;
  for (const auto & [category, examples] : train) {
    const auto it = validation.find(category);
    if (it == validation.end()) {
      throw Error(
        ErrorKind::kInsufficientData, "no validation examples for " + std::string(to_string(category)));
    }
    out.emplace(category, train_segmentation(examples, it->second, options));
  }
  return out;
}

namespace
{

// Indices of `members` connected to the member nearest the origin (the click) by links no longer
// than `radius`, in ascending order.
std::vector<std::size_t> click_component(
  const std::vector<Point3> & points, const std::vector<std::size_t> & members, double radius)
{
  const auto norm2 = [](const Point3 & p) { return p.x * p.x + p.y * p.y + p.z * p.z; };
  std::size_t seed = 0;
  for (std::size_t m = 1; m < members.size(); ++m) {
    if (norm2(points[members[m]]) < norm2(points[members[seed]])) {
      seed = m;
    }
  }
  const double r2 = radius * radius;
  std::vector<char> reached(members.size(), 0);
  std::vector<std::size_t> stack{seed};
  reached[seed] = 1;
  while (!stack.empty()) {
    const Point3 p = points[members[stack.back()]];
    stack.pop_back();
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (!reached[m] && norm2(points[members[m]] - p) <= r2) {
        reached[m] = 1;
        stack.push_back(m);
      }
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (reached[m]) {
      kept.push_back(members[m]);
    }
  }
  return kept;
}

}  // namespace

InstanceMask segment_instance(
  const nn::ModelParams & model, const PointCloud & scene, const Click & click, double k,
  const SegmentOptions & options)
{
  if (options.count == 0) {
    throw Error(ErrorKind::kParameter, "segmentation sample count must be positive");
  }
  if (!(options.component_radius >= 0.0) || !std::isfinite(options.component_radius)) {
    throw Error(ErrorKind::kParameter, "component radius must be non-negative");
  }
  pointcloud::CenteredPatch patch;
  try {
    patch = pointcloud::crop_volume(scene, click.position, k);
  } catch (const Error & e) {
    if (e.kind() == ErrorKind::kEmptyPatch) {
      throw Error(ErrorKind::kEmptyInstance, e.what());
    }
    throw;
  }
  const nn::Matrix points = nn::to_matrix(patch.points);
  const std::size_t n = patch.points.size();

  // Row -> patch point for every network input row, one chunk per example.
  std::vector<std::vector<std::size_t>> chunks;
  if (n <= options.count) {
    chunks.push_back(nn::sample_fixed_points(points, options.count, options.seed).index_map);
  } else {
    Rng rng(options.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    for (std::size_t begin = 0; begin < n; begin += options.count) {
      const std::size_t end = std::min(n, begin + options.count);
      std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      while (chunk.size() < options.count) {
        chunk.push_back(order[rng.index(n)]);
      }
      chunks.push_back(std::move(chunk));
    }
  }
  std::vector<nn::Matrix> sets;
  for (const auto & chunk : chunks) {
    nn::Matrix m(static_cast<Eigen::Index>(chunk.size()), 3);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      m.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(chunk[r]));
    }
    sets.push_back(std::move(m));
  }
  const auto cache = nn::forward(model, nn::PointBatch::stack(sets), false, 0);

  std::vector<double> probability(n, 0.0);
  std::size_t row = 0;
  for (const auto & chunk : chunks) {
    for (std::size_t idx : chunk) {
      const auto r = static_cast<Eigen::Index>(row++);
      probability[idx] = std::max(probability[idx], foreground_probability(cache.output(r, 0), cache.output(r, 1)));
    }
  }

  double best = 0.0;
  std::vector<std::size_t> foreground;
  for (std::size_t i = 0; i < n; ++i) {
    best = std::max(best, probability[i]);
    if (probability[i] >= options.threshold) {
      foreground.push_back(i);
    }
  }
  if (foreground.empty()) {
    throw BelowThresholdError(best, "no point reached the foreground threshold");
  }
  if (options.component_radius > 0.0) {
    foreground = click_component(patch.points, foreground, options.component_radius);
  }
  InstanceMask mask;
  mask.click = click;
  for (const std::size_t i : foreground) {
    mask.source_indices.push_back(patch.source_indices[i]);
    mask.foreground_confidence.push_back(probability[i]);
  }
  return mask;
}

std::string manifest_line(const ManifestRecord & r)
{
  const nlohmann::json j{
    {"scene_id", r.scene_id},
    {"instance", r.instance},
    {"category", r.category},
    {"click", r.click},
    {"seed", r.seed},
    {"split", r.split}};
  return j.dump();
}

std::vector<ManifestRecord> parse_manifest(const std::string & text)
{
  std::vector<ManifestRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.scene_id = j.at("scene_id").get<std::string>();
      r.instance = j.at("instance").get<std::size_t>();
      r.category = j.at("category").get<Category>();
      r.click = j.at("click").get<Point3>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.split = j.value("split", std::string("train"));
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception & e) {
      throw Error(ErrorKind::kParse, "manifest line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cloudseed::segmentation
