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

#include "cloudseed/boxfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/nn/loss.hpp"
#include "cloudseed/nn/sampling.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::boxfit
{
namespace
{

constexpr double kMinDimension = 0.05;
constexpr std::uint64_t kBatchStream = 0xb0c5;
constexpr std::uint64_t kDropoutStream = 0xd40b;
constexpr std::uint64_t kAugmentStream = 0xa0b;
constexpr std::uint64_t kResampleStream = 0x5a3b;
constexpr std::uint64_t kValidationStream = 0x7a1d;
constexpr std::uint64_t kValidationNoiseStream = 0x7a1e;

struct Mean3
{
  double h{0.0};
  double w{0.0};
  double l{0.0};
};

Mean3 mean_size(const std::vector<const Box3D *> & boxes)
{
  Mean3 m;
  for (const Box3D * b : boxes) {
    m.h += b->h;
    m.w += b->w;
    m.l += b->l;
  }
  const double n = static_cast<double>(boxes.size());
  return {m.h / n, m.w / n, m.l / n};
}

Template make_template(Category c, const Mean3 & m) { return {c, m.h, m.w, m.l}; }

std::array<double, 3> template_dims(const Template & t) { return {t.h, t.w, t.l}; }

int argmax_first(std::span<const double> v)
{
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

Point3 row_point(const nn::Matrix & m, Eigen::Index r) { return {m(r, 0), m(r, 1), m(r, 2)}; }

Point3 column_mean(const nn::Matrix & points)
{
  if (points.rows() < 1 || points.cols() != 3) {
    throw Error(ErrorKind::kDimension, "expected a non-empty n x 3 point matrix");
  }
  const Eigen::RowVector3d m = points.colwise().mean();
  return {m(0), m(1), m(2)};
}

nn::Matrix subtract(const nn::Matrix & points, const Point3 & c)
{
  nn::Matrix out = points;
  out.col(0).array() -= c.x;
  out.col(1).array() -= c.y;
  out.col(2).array() -= c.z;
  return out;
}

void rotate_example(BoxExample & e, double angle)
{
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const nn::Matrix p = e.points;
  e.points.col(0) = c * p.col(0) + s * p.col(2);
  e.points.col(2) = -s * p.col(0) + c * p.col(2);
  const double x = e.box.cx;
  const double z = e.box.cz;
  if (e.distractors.rows() > 0) {
    const nn::Matrix d = e.distractors;
    e.distractors.col(0) = c * d.col(0) + s * d.col(2);
    e.distractors.col(2) = -s * d.col(0) + c * d.col(2);
  }
  e.box.cx = c * x + s * z;
  e.box.cz = -s * x + c * z;
  e.box.ry = normalize_angle(e.box.ry + angle);
}

// Loss terms of one raw output vector, optionally with gradients.
BoxLossBreakdown evaluate_terms(
  std::span<const double> raw, const Point3 & stage1, const Box3D & gt, const TemplateSet & templates,
  const BoxLossWeights & weights, int nh, std::vector<double> * d_raw, Point3 * d_stage1)
{
  const OutputLayout layout{nh};
  if (static_cast<int>(raw.size()) != layout.dim()) {
    throw Error(
      ErrorKind::kDimension, "box output has " + std::to_string(raw.size()) + " values, expected " +
                               std::to_string(layout.dim()));
  }
  if (d_raw != nullptr) {
    d_raw->assign(raw.size(), 0.0);
  }
  BoxLossBreakdown b;

  const std::array<double, 3> g{gt.cx, gt.cy, gt.cz};
  const std::array<double, 3> c1{stage1.x, stage1.y, stage1.z};
  std::array<double, 3> c2{};
  std::array<double, 3> d1{};
  for (int k = 0; k < 3; ++k) {
    c2[k] = c1[k] + raw[static_cast<std::size_t>(OutputLayout::centroid() + k)];
  }
  b.tnet_centroid = nn::smooth_l1(c1, g);
  b.box_centroid = nn::smooth_l1(c2, g);
  for (int k = 0; k < 3; ++k) {
    const double dt = weights.tnet_centroid * nn::smooth_l1_derivative(c1[k] - g[k]) / 3.0;
    const double db = weights.box_centroid * nn::smooth_l1_derivative(c2[k] - g[k]) / 3.0;
    d1[k] = dt + db;
    if (d_raw != nullptr) {
      (*d_raw)[static_cast<std::size_t>(OutputLayout::centroid() + k)] = db;
    }
  }

  const int t = assign_gt_template(gt, templates);
  std::array<double, kNumTemplates> d_cls{};
  b.template_cls = nn::softmax_cross_entropy(
    raw.subspan(OutputLayout::template_scores(), kNumTemplates), static_cast<std::size_t>(t), d_cls);

  const auto dims = template_dims(templates[static_cast<std::size_t>(t)]);
  const std::array<double, 3> size_target{gt.h - dims[0], gt.w - dims[1], gt.l - dims[2]};
  const auto size_pred = raw.subspan(static_cast<std::size_t>(OutputLayout::size_residuals() + 3 * t), 3);
  b.size_residual = nn::smooth_l1(size_pred, size_target);

  const HeadingCode code = encode_heading(gt.ry, nh);
  std::vector<double> d_heading(static_cast<std::size_t>(nh));
  b.heading_cls = nn::softmax_cross_entropy(
    raw.subspan(static_cast<std::size_t>(layout.heading_scores()), static_cast<std::size_t>(nh)),
    static_cast<std::size_t>(code.bin), d_heading);
  const double heading_pred = raw[static_cast<std::size_t>(layout.heading_residuals() + code.bin)];
  b.heading_residual = nn::smooth_l1_term(heading_pred - code.residual);

  b.total = weights.tnet_centroid * b.tnet_centroid + weights.box_centroid * b.box_centroid +
            weights.template_cls * b.template_cls + weights.size_residual * b.size_residual +
            weights.heading_cls * b.heading_cls + weights.heading_residual * b.heading_residual;

  if (d_raw != nullptr) {
    auto & d = *d_raw;
    for (int i = 0; i < kNumTemplates; ++i) {
      d[static_cast<std::size_t>(OutputLayout::template_scores() + i)] = weights.template_cls * d_cls[static_cast<std::size_t>(i)];
    }
    for (int k = 0; k < 3; ++k) {
      d[static_cast<std::size_t>(OutputLayout::size_residuals() + 3 * t + k)] =
        weights.size_residual * nn::smooth_l1_derivative(size_pred[static_cast<std::size_t>(k)] - size_target[static_cast<std::size_t>(k)]) / 3.0;
    }
    for (int i = 0; i < nh; ++i) {
      d[static_cast<std::size_t>(layout.heading_scores() + i)] = weights.heading_cls * d_heading[static_cast<std::size_t>(i)];
    }
    d[static_cast<std::size_t>(layout.heading_residuals() + code.bin)] =
      weights.heading_residual * nn::smooth_l1_derivative(heading_pred - code.residual);
  }
  if (d_stage1 != nullptr) {
    *d_stage1 = {d1[0], d1[1], d1[2]};
  }
  return b;
}

int heading_bins_of(const nn::ArchDescriptor & box_arch)
{
  const int nh = (box_arch.output_dim - OutputLayout::size_residuals() - 3 * kNumTemplates) / 2;
  if (nh < 1 || OutputLayout{nh}.dim() != box_arch.output_dim) {
    throw Error(ErrorKind::kDimension, "box network output width does not match any heading bin count");
  }
  return nh;
}

}  // namespace

TemplateSet compute_templates(const std::vector<GroundTruthObject> & training_gt)
{
  std::vector<const Box3D *> cars;
  std::vector<const Box3D *> pedestrians;
  std::vector<const Box3D *> cyclists;
  for (const auto & o : training_gt) {
    switch (o.category) {
      case Category::kCar: cars.push_back(&o.box); break;
      case Category::kPedestrian: pedestrians.push_back(&o.box); break;
      case Category::kCyclist: cyclists.push_back(&o.box); break;
    }
  }
  if (cars.empty() || pedestrians.empty() || cyclists.empty()) {
    throw Error(ErrorKind::kInsufficientData, "templates need at least one car, pedestrian and cyclist");
  }

  std::sort(cars.begin(), cars.end(), [](const Box3D * a, const Box3D * b) { return a->l < b->l; });
  double lo = cars.front()->l;
  double hi = cars.back()->l;
  std::vector<bool> in_large(cars.size(), false);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < cars.size(); ++i) {
      // Ties go to the short cluster.
      const bool large = std::abs(cars[i]->l - hi) < std::abs(cars[i]->l - lo);
      changed = changed || large != in_large[i];
      in_large[i] = large;
    }
    double sum_lo = 0.0;
    double sum_hi = 0.0;
    std::size_t n_lo = 0;
    for (std::size_t i = 0; i < cars.size(); ++i) {
      (in_large[i] ? sum_hi : sum_lo) += cars[i]->l;
      n_lo += in_large[i] ? 0 : 1;
    }
    const std::size_t n_hi = cars.size() - n_lo;
    if (n_lo > 0) {
      lo = sum_lo / static_cast<double>(n_lo);
    }
    if (n_hi > 0) {
      hi = sum_hi / static_cast<double>(n_hi);
    }
    if (!changed && iter > 0) {
      break;
    }
  }
  std::vector<const Box3D *> small_cars;
  std::vector<const Box3D *> large_cars;
  for (std::size_t i = 0; i < cars.size(); ++i) {
    (in_large[i] ? large_cars : small_cars).push_back(cars[i]);
  }
  if (large_cars.empty()) {
    large_cars = small_cars;
  }
  return {
    make_template(Category::kCar, mean_size(small_cars)),
    make_template(Category::kCar, mean_size(large_cars)),
    make_template(Category::kPedestrian, mean_size(pedestrians)),
    make_template(Category::kCyclist, mean_size(cyclists))};
}

nlohmann::json templates_json(const TemplateSet & templates)
{
  nlohmann::json out = nlohmann::json::array();
  for (const auto & t : templates) {
    out.push_back({{"category", t.category}, {"h", t.h}, {"w", t.w}, {"l", t.l}});
  }
  return out;
}

TemplateSet templates_from_json(const nlohmann::json & j)
{
  if (!j.is_array() || j.size() != kNumTemplates) {
    throw Error(ErrorKind::kParse, "templates file must hold exactly 4 entries");
  }
  TemplateSet out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {j[i].at("category").get<Category>(), j[i].at("h").get<double>(), j[i].at("w").get<double>(),
              j[i].at("l").get<double>()};
    if (!(out[i].h > 0.0 && out[i].w > 0.0 && out[i].l > 0.0)) {
      throw Error(ErrorKind::kParse, "template dimensions must be positive");
    }
  }
  return out;
}

double heading_bin_center(int bin, int nh)
{
  return normalize_angle(2.0 * M_PI * static_cast<double>(bin) / static_cast<double>(nh));
}

HeadingCode encode_heading(double ry, int nh)
{
  if (nh < 1) {
    throw Error(ErrorKind::kParameter, "heading bin count must be positive");
  }
  const double width = 2.0 * M_PI / static_cast<double>(nh);
  const double angle = normalize_angle(ry);
  const double i = std::ceil(angle / width - 0.5);
  HeadingCode code;
  code.residual = angle - i * width;
  code.bin = static_cast<int>(((static_cast<long long>(i) % nh) + nh) % nh);
  return code;
}

double decode_heading(int bin, double residual, int nh)
{
  const double width = 2.0 * M_PI / static_cast<double>(nh);
  return normalize_angle(static_cast<double>(bin) * width + residual);
}

void BoxLossWeights::validate() const
{
  const std::array<double, 6> all{tnet_centroid, box_centroid, template_cls, size_residual, heading_cls, heading_residual};
  bool positive = false;
  for (double w : all) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::kConfig, "loss weights must be finite and non-negative");
    }
    positive = positive || w > 0.0;
  }
  if (!positive) {
    throw Error(ErrorKind::kConfig, "at least one loss weight must be positive");
  }
}

void to_json(nlohmann::json & j, const BoxLossWeights & w)
{
  j = {
    {"tnet_centroid", w.tnet_centroid},
    {"box_centroid", w.box_centroid},
    {"template_cls", w.template_cls},
    {"size_residual", w.size_residual},
    {"heading_cls", w.heading_cls},
    {"heading_residual", w.heading_residual}};
}

void from_json(const nlohmann::json & j, BoxLossWeights & w)
{
  w.tnet_centroid = j.value("tnet_centroid", w.tnet_centroid);
  w.box_centroid = j.value("box_centroid", w.box_centroid);
  w.template_cls = j.value("template_cls", w.template_cls);
  w.size_residual = j.value("size_residual", w.size_residual);
  w.heading_cls = j.value("heading_cls", w.heading_cls);
  w.heading_residual = j.value("heading_residual", w.heading_residual);
}

namespace
{

struct StageOne
{
  Point3 mean;
  Point3 residual;
  nn::Matrix centered;

  Point3 centroid() const { return mean + residual; }

  // Box network input. Built from the centered cloud so a translated mask yields bitwise the
  // same input.
  nn::Matrix box_input() const { return subtract(centered, residual); }
};

StageOne run_stage_one(const nn::ModelParams & tnet, const nn::Matrix & mask_points)
{
  StageOne s;
  s.mean = column_mean(mask_points);
  s.centered = subtract(mask_points, s.mean);
  const nn::Vector r = nn::forward_vec(tnet, s.centered);
  if (r.size() != 3) {
    throw Error(ErrorKind::kDimension, "T-Net must emit a 3-vector");
  }
  s.residual = {r(0), r(1), r(2)};
  return s;
}

}  // namespace

Point3 tnet_centroid(const nn::ModelParams & tnet, const nn::Matrix & mask_points)
{
  return run_stage_one(tnet, mask_points).centroid();
}

BoxPrediction decode_box(
  std::span<const double> raw, const Point3 & stage1, const TemplateSet & templates, int nh)
{
  const OutputLayout layout{nh};
  if (static_cast<int>(raw.size()) != layout.dim()) {
    throw Error(ErrorKind::kDimension, "box output width does not match the heading bin count");
  }
  BoxPrediction p;
  p.raw.assign(raw.begin(), raw.end());
  p.stage1_centroid = stage1;
  p.centroid_residual = {raw[0], raw[1], raw[2]};
  const auto scores = nn::softmax(raw.subspan(OutputLayout::template_scores(), kNumTemplates));
  std::copy(scores.begin(), scores.end(), p.template_scores.begin());
  p.template_index = argmax_first(scores);
  p.heading_bin_scores = nn::softmax(raw.subspan(static_cast<std::size_t>(layout.heading_scores()), static_cast<std::size_t>(nh)));
  p.heading_bin = argmax_first(p.heading_bin_scores);

  const auto dims = template_dims(templates[static_cast<std::size_t>(p.template_index)]);
  std::array<double, 3> size{};
  for (int k = 0; k < 3; ++k) {
    size[static_cast<std::size_t>(k)] =
      dims[static_cast<std::size_t>(k)] + raw[static_cast<std::size_t>(OutputLayout::size_residuals() + 3 * p.template_index + k)];
    if (!(size[static_cast<std::size_t>(k)] > 0.0)) {
      size[static_cast<std::size_t>(k)] = kMinDimension;
      p.size_clamped = true;
    }
  }
  const Point3 c = stage1 + p.centroid_residual;
  p.box = {c.x, c.y, c.z, size[0], size[1], size[2],
           decode_heading(p.heading_bin, raw[static_cast<std::size_t>(layout.heading_residuals() + p.heading_bin)], nh)};
  return p;
}

BoxPrediction box_estimate(
  const nn::ModelParams & boxnet, const nn::Matrix & mask_points, const Point3 & stage1,
  const TemplateSet & templates)
{
  const int nh = heading_bins_of(boxnet.arch);
  const nn::Vector raw = nn::forward_vec(boxnet, subtract(mask_points, stage1));
  return decode_box(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), stage1, templates, nh);
}

int assign_gt_template(const Box3D & gt, const TemplateSet & templates)
{
  int best = 0;
  double best_iou = -1.0;
  for (int i = 0; i < kNumTemplates; ++i) {
    const auto & t = templates[static_cast<std::size_t>(i)];
    const Box3D posed{gt.cx, gt.cy, gt.cz, t.h, t.w, t.l, gt.ry};
    const double iou = geometry::box_iou_3d(gt, posed);
    if (iou > best_iou) {
      best_iou = iou;
      best = i;
    }
  }
  return best;
}

BoxLossBreakdown box_loss(
  const BoxPrediction & pred, const Box3D & gt, const TemplateSet & templates,
  const BoxLossWeights & weights)
{
  weights.validate();
  return evaluate_terms(
    pred.raw, pred.stage1_centroid, gt, templates, weights, static_cast<int>(pred.heading_bin_scores.size()),
    nullptr, nullptr);
}

BoxLossGradient box_loss_gradient(
  std::span<const double> raw, const Point3 & stage1, const Box3D & gt, const TemplateSet & templates,
  const BoxLossWeights & weights, int nh)
{
  BoxLossGradient g;
  g.loss = evaluate_terms(raw, stage1, gt, templates, weights, nh, &g.d_raw, &g.d_stage1).total;
  return g;
}

void MaskNoise::validate() const
{
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw Error(ErrorKind::kConfig, "mask noise probability must lie in [0, 1]");
  }
  if (!(max_fraction >= 0.0) || !std::isfinite(max_fraction)) {
    throw Error(ErrorKind::kConfig, "mask noise fraction must be non-negative");
  }
}

void to_json(nlohmann::json & j, const MaskNoise & n)
{
  j = {{"probability", n.probability}, {"max_fraction", n.max_fraction}};
}

void from_json(const nlohmann::json & j, MaskNoise & n)
{
  n.probability = j.value("probability", n.probability);
  n.max_fraction = j.value("max_fraction", n.max_fraction);
}

void add_mask_noise(BoxExample & example, const MaskNoise & noise, Rng & rng)
{
  const Eigen::Index available = example.distractors.rows();
  if (available == 0 || !(rng.uniform() < noise.probability)) {
    return;
  }
  const double fraction = rng.uniform(0.0, noise.max_fraction);
  const auto wanted = static_cast<Eigen::Index>(fraction * static_cast<double>(example.points.rows())) + 1;
  const Eigen::Index m = std::min(wanted, available);
  const auto anchor = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(available)));
  const Eigen::RowVector3d a = example.distractors.row(anchor);
  std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(available));
  for (Eigen::Index r = 0; r < available; ++r) {
    order[static_cast<std::size_t>(r)] = {(example.distractors.row(r) - a).squaredNorm(), r};
  }
  std::partial_sort(order.begin(), order.begin() + m, order.end());
  const Eigen::Index n = example.points.rows();
  example.points.conservativeResize(n + m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    example.points.row(n + i) = example.distractors.row(order[static_cast<std::size_t>(i)].second);
  }
}

void BoxTrainOptions::validate() const
{
  train.validate();
  weights.validate();
  mask_noise.validate();
  if (tnet_arch.head != nn::HeadKind::kVector || tnet_arch.output_dim != 3) {
    throw Error(ErrorKind::kConfig, "T-Net must be a vector head with 3 outputs");
  }
  if (box_arch.head != nn::HeadKind::kVector || box_arch.output_dim != OutputLayout{nh}.dim()) {
    throw Error(ErrorKind::kConfig, "box network output width must match the heading bin count");
  }
  if (count == 0) {
    throw Error(ErrorKind::kConfig, "box point count must be positive");
  }
}

void to_json(nlohmann::json & j, const BoxTrainOptions & o)
{
  j = {
    {"train", o.train},
    {"tnet_arch", o.tnet_arch},
    {"box_arch", o.box_arch},
    {"heading_bins", o.nh},
    {"weights", o.weights},
    {"count", o.count},
    {"augment_rotation", o.augment_rotation},
    {"mask_noise", o.mask_noise}};
}

void from_json(const nlohmann::json & j, BoxTrainOptions & o)
{
  if (j.contains("train")) {
    o.train = j.at("train").get<nn::TrainConfig>();
  }
  o.nh = j.value("heading_bins", o.nh);
  if (j.contains("tnet_arch")) {
    o.tnet_arch = j.at("tnet_arch").get<nn::ArchDescriptor>();
  }
  o.box_arch.output_dim = OutputLayout{o.nh}.dim();
  if (j.contains("box_arch")) {
    o.box_arch = j.at("box_arch").get<nn::ArchDescriptor>();
  }
  if (j.contains("weights")) {
    o.weights = j.at("weights").get<BoxLossWeights>();
  }
  o.count = j.value("count", o.count);
  o.augment_rotation = j.value("augment_rotation", o.augment_rotation);
  if (j.contains("mask_noise")) {
    o.mask_noise = j.at("mask_noise").get<MaskNoise>();
  }
}

nn::Matrix resample(const nn::Matrix & points, std::size_t count, std::uint64_t seed)
{
  return nn::sample_fixed_points(points, count, seed).points;
}

PipelineGradient pipeline_gradient(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, std::span<const BoxExample> batch,
  const TemplateSet & templates, const BoxTrainOptions & options, bool train_mode, std::uint64_t seed)
{
  if (batch.empty()) {
    throw Error(ErrorKind::kInsufficientData, "empty box batch");
  }
  const std::size_t n = batch.size();
  std::vector<nn::Matrix> points(n);
  std::vector<Point3> means(n);
  std::vector<nn::Matrix> tnet_inputs(n);
  for (std::size_t e = 0; e < n; ++e) {
    points[e] = resample(batch[e].points, options.count, Rng::derive(Rng::derive(seed, kResampleStream), e));
    means[e] = column_mean(points[e]);
    tnet_inputs[e] = subtract(points[e], means[e]);
  }
  const auto tcache = nn::forward(
    tnet, nn::PointBatch::stack(tnet_inputs), train_mode, Rng::derive(Rng::derive(seed, kDropoutStream), 1));
  std::vector<Point3> stage1(n);
  std::vector<nn::Matrix> box_inputs(n);
  for (std::size_t e = 0; e < n; ++e) {
    const Point3 r = row_point(tcache.output, static_cast<Eigen::Index>(e));
    stage1[e] = means[e] + r;
    box_inputs[e] = subtract(tnet_inputs[e], r);
  }
  const nn::PointBatch box_batch = nn::PointBatch::stack(box_inputs);
  const auto bcache =
    nn::forward(boxnet, box_batch, train_mode, Rng::derive(Rng::derive(seed, kDropoutStream), 2));

  PipelineGradient out;
  nn::Matrix d_box(bcache.output.rows(), bcache.output.cols());
  nn::Matrix d_stage1(static_cast<Eigen::Index>(n), 3);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t e = 0; e < n; ++e) {
    const auto r = static_cast<Eigen::Index>(e);
    const nn::Vector raw = bcache.output.row(r).transpose();
    const auto g = box_loss_gradient(
      std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), stage1[e], batch[e].box,
      templates, options.weights, options.nh);
    out.loss += g.loss * scale;
    for (Eigen::Index k = 0; k < d_box.cols(); ++k) {
      d_box(r, k) = g.d_raw[static_cast<std::size_t>(k)] * scale;
    }
    d_stage1.row(r) << g.d_stage1.x * scale, g.d_stage1.y * scale, g.d_stage1.z * scale;
  }
  const auto bgrad = nn::backward_from_output(boxnet, bcache, d_box, true);
  // Box inputs are points minus the stage-one centroid.
  for (std::size_t e = 0; e < n; ++e) {
    const auto begin = static_cast<Eigen::Index>(box_batch.offsets[e]);
    const auto rows = static_cast<Eigen::Index>(box_batch.offsets[e + 1]) - begin;
    d_stage1.row(static_cast<Eigen::Index>(e)) -= bgrad.input.middleRows(begin, rows).colwise().sum();
  }
  out.tnet = nn::backward_from_output(tnet, tcache, d_stage1).params;
  out.boxnet = bgrad.params;
  return out;
}

double pipeline_loss(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, const BoxExample & example,
  const TemplateSet & templates, const BoxTrainOptions & options, std::uint64_t seed)
{
  const nn::Matrix points =
    resample(example.points, options.count, Rng::derive(Rng::derive(seed, kResampleStream), 0));
  const StageOne s = run_stage_one(tnet, points);
  const nn::Vector raw = nn::forward_vec(boxnet, s.box_input());
  return evaluate_terms(
           std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), s.centroid(), example.box,
           templates, options.weights, options.nh, nullptr, nullptr)
    .total;
}

BoxTrainResult train_boxfit(
  const std::vector<BoxExample> & train, const std::vector<BoxExample> & validation,
  const TemplateSet & templates, const BoxTrainOptions & options)
{
  options.validate();
  if (train.empty() || validation.empty()) {
    throw Error(ErrorKind::kInsufficientData, "box training needs training and validation examples");
  }
  for (const auto & set : {&train, &validation}) {
    for (const auto & e : *set) {
      if (e.points.rows() < 1 || e.points.cols() != 3 || !e.box.valid() ||
          (e.distractors.rows() > 0 && e.distractors.cols() != 3)) {
        throw Error(ErrorKind::kDimension, "box example needs points and a valid box");
      }
    }
  }
  const nn::TrainConfig & config = options.train;
  std::vector<BoxExample> validation_noisy = validation;
  Rng validation_noise(Rng::derive(config.rng_seed, kValidationNoiseStream));
  for (auto & e : validation_noisy) {
    add_mask_noise(e, options.mask_noise, validation_noise);
  }
  nn::ModelParams tnet = nn::ModelParams::initialize(options.tnet_arch, Rng::derive(config.rng_seed, 1));
  nn::ModelParams boxnet = nn::ModelParams::initialize(options.box_arch, Rng::derive(config.rng_seed, 2));
  const std::size_t split = tnet.values.size();

  auto unpack = [&](std::span<const double> values) {
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(split), tnet.values.begin());
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(split), values.end(), boxnet.values.begin());
  };

  const auto step = [&](std::int64_t iteration, std::span<const double> values, std::span<double> grad) {
    unpack(values);
    const auto it = static_cast<std::uint64_t>(iteration);
    Rng pick(Rng::derive(Rng::derive(config.rng_seed, kBatchStream), it));
    Rng augment(Rng::derive(Rng::derive(config.rng_seed, kAugmentStream), it));
    std::vector<BoxExample> batch;
    batch.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      BoxExample e = train[pick.index(train.size())];
      add_mask_noise(e, options.mask_noise, augment);
      if (options.augment_rotation) {
        rotate_example(e, augment.uniform(-M_PI, M_PI));
      }
      batch.push_back(std::move(e));
    }
    const auto g = pipeline_gradient(tnet, boxnet, batch, templates, options, true, Rng::derive(config.rng_seed, it));
    std::copy(g.tnet.begin(), g.tnet.end(), grad.begin());
    std::copy(g.boxnet.begin(), g.boxnet.end(), grad.begin() + static_cast<std::ptrdiff_t>(split));
    return g.loss;
  };
  const auto validate = [&](std::span<const double> values) {
    unpack(values);
    constexpr std::size_t kChunk = 32;
    double total = 0.0;
    for (std::size_t begin = 0; begin < validation_noisy.size(); begin += kChunk) {
      const std::size_t end = std::min(validation_noisy.size(), begin + kChunk);
      const auto g = pipeline_gradient(
        tnet, boxnet, std::span<const BoxExample>(validation_noisy).subspan(begin, end - begin), templates, options,
        false, Rng::derive(Rng::derive(config.rng_seed, kValidationStream), begin));
      total += g.loss * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(validation_noisy.size());
  };

  std::vector<double> values = tnet.values;
  values.insert(values.end(), boxnet.values.begin(), boxnet.values.end());
  BoxTrainResult result;
  result.history = nn::run_training(config, values, step, validate);
  unpack(values);
  result.tnet = std::move(tnet);
  result.boxnet = std::move(boxnet);
  return result;
}

BoxPrediction estimate_box(
  const nn::ModelParams & tnet, const nn::ModelParams & boxnet, const nn::Matrix & mask_points,
  const TemplateSet & templates, std::size_t count, std::uint64_t seed)
{
  const nn::Matrix points = resample(mask_points, count, seed);
  const StageOne s = run_stage_one(tnet, points);
  const nn::Vector raw = nn::forward_vec(boxnet, s.box_input());
  return decode_box(
    std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), s.centroid(), templates,
    heading_bins_of(boxnet.arch));
}

}  // namespace cloudseed::boxfit
