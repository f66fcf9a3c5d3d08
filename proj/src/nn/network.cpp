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

#include "cloudseed/nn/network.hpp"

#include <cmath>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/nn/loss.hpp"
#include "cloudseed/rng.hpp"
#include "kernel.hpp"

namespace cloudseed::nn
{
namespace
{

using ConstMap = Eigen::Map<const Matrix>;

ConstMap weights(const ModelParams & p, const LayerSlice & s)
{
  return ConstMap(p.values.data() + s.weight_offset, s.fan_in, s.fan_out);
}

// Weight rows (k-major) for the forward kernel; `first_row` selects a sub-block of the fan-in.
std::vector<double> weight_rows(const ModelParams & p, const LayerSlice & s, int first_row, int count)
{
  const auto w = weights(p, s);
  std::vector<double> rows(static_cast<std::size_t>(count) * static_cast<std::size_t>(s.fan_out));
  for (int k = 0; k < count; ++k) {
    for (int j = 0; j < s.fan_out; ++j) {
      rows[static_cast<std::size_t>(k) * s.fan_out + j] = w(first_row + k, j);
    }
  }
  return rows;
}

Matrix affine_block(
  const Matrix & in, const ModelParams & p, const LayerSlice & s, int first_row, bool with_bias)
{
  const auto rows = weight_rows(p, s, first_row, static_cast<int>(in.cols()));
  Matrix out(in.rows(), s.fan_out);
  detail::affine_forward(
    in.data(), static_cast<std::size_t>(in.rows()), static_cast<std::size_t>(in.cols()), rows.data(),
    with_bias ? p.values.data() + s.bias_offset : nullptr, static_cast<std::size_t>(s.fan_out),
    out.data());
  return out;
}

Matrix affine(const Matrix & in, const ModelParams & p, const LayerSlice & s)
{
  if (in.cols() != s.fan_in) {
    throw Error(ErrorKind::kDimension, "layer input width mismatch");
  }
  return affine_block(in, p, s, 0, true);
}

void accumulate_layer(
  std::vector<double> & grad, const LayerSlice & s, const Matrix & input, const Matrix & d_pre)
{
  Eigen::Map<Matrix> dw(grad.data() + s.weight_offset, s.fan_in, s.fan_out);
  Eigen::Map<Eigen::RowVectorXd> db(grad.data() + s.bias_offset, s.fan_out);
  dw.noalias() += input.transpose() * d_pre;
  db += d_pre.colwise().sum();
}

// The per-point head consumes [features | pooled feature of the example]. The concatenation is
// never materialized: the pooled half of the weight matrix is applied once per example.
Matrix concat_affine(
  const Matrix & features, const Matrix & pooled, const std::vector<std::size_t> & offsets,
  const ModelParams & p, const LayerSlice & s)
{
  const Eigen::Index width = features.cols();
  Matrix out = affine_block(features, p, s, 0, false);
  const Matrix shared = affine_block(pooled, p, s, static_cast<int>(width), true);
  for (std::size_t e = 0; e + 1 < offsets.size(); ++e) {
    const auto begin = static_cast<Eigen::Index>(offsets[e]);
    const auto rows = static_cast<Eigen::Index>(offsets[e + 1]) - begin;
    out.middleRows(begin, rows).rowwise() += shared.row(static_cast<Eigen::Index>(e));
  }
  return out;
}

void concat_backward(
  std::vector<double> & grad, const ModelParams & p, const LayerSlice & s, const ForwardCache & cache,
  const Matrix & d_pre, Matrix & d_features, Matrix & d_pooled)
{
  const Matrix & features = cache.point_activations.back();
  const Eigen::Index width = features.cols();
  const Eigen::Index examples = cache.pooled.rows();
  Matrix d_sum(examples, d_pre.cols());
  for (Eigen::Index e = 0; e < examples; ++e) {
    const auto begin = static_cast<Eigen::Index>(cache.offsets[static_cast<std::size_t>(e)]);
    const auto rows = static_cast<Eigen::Index>(cache.offsets[static_cast<std::size_t>(e) + 1]) - begin;
    d_sum.row(e) = d_pre.middleRows(begin, rows).colwise().sum();
  }
  Eigen::Map<Matrix> dw(grad.data() + s.weight_offset, s.fan_in, s.fan_out);
  Eigen::Map<Eigen::RowVectorXd> db(grad.data() + s.bias_offset, s.fan_out);
  dw.topRows(width).noalias() += features.transpose() * d_pre;
  dw.bottomRows(width).noalias() += cache.pooled.transpose() * d_sum;
  db += d_sum.colwise().sum();
  const auto w = weights(p, s);
  d_features = d_pre * w.topRows(width).transpose();
  d_pooled = d_sum * w.bottomRows(width).transpose();
}

Matrix relu_mask(const Matrix & activation)
{
  return (activation.array() > 0.0).cast<double>().matrix();
}

void require_finite(const Matrix & m, const char * stage)
{
  if (!m.allFinite()) {
    throw Error(ErrorKind::kNumericOverflow, std::string("non-finite values in ") + stage);
  }
}

void append_layer(std::size_t & cursor, int fan_in, int fan_out, std::vector<LayerSlice> * into, LayerSlice * single)
{
  LayerSlice s;
  s.fan_in = fan_in;
  s.fan_out = fan_out;
  s.weight_offset = cursor;
  cursor += static_cast<std::size_t>(fan_in) * static_cast<std::size_t>(fan_out);
  s.bias_offset = cursor;
  cursor += static_cast<std::size_t>(fan_out);
  if (into != nullptr) {
    into->push_back(s);
  } else {
    *single = s;
  }
}

}  // namespace

void ArchDescriptor::validate() const
{
  if (input_dim < 1 || per_point_widths.empty()) {
    throw Error(ErrorKind::kDimension, "architecture needs an input dimension and per-point layers");
  }
  for (int w : per_point_widths) {
    if (w < 1) {
      throw Error(ErrorKind::kDimension, "per-point layer widths must be positive");
    }
  }
  for (int w : global_widths) {
    if (w < 1) {
      throw Error(ErrorKind::kDimension, "global layer widths must be positive");
    }
  }
  if (output_dim < 1) {
    throw Error(ErrorKind::kDimension, "output_dim must be at least 1");
  }
  if (head == HeadKind::kPerPointBinary && output_dim != 2) {
    throw Error(ErrorKind::kDimension, "binary per-point head emits exactly 2 logits");
  }
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) {
    throw Error(ErrorKind::kParameter, "dropout keep probability must lie in (0, 1]");
  }
}

ArchDescriptor ArchDescriptor::segmentation() { return ArchDescriptor{}; }

ArchDescriptor ArchDescriptor::vector_head(int output_dim)
{
  ArchDescriptor arch;
  arch.head = HeadKind::kVector;
  arch.output_dim = output_dim;
  return arch;
}

void to_json(nlohmann::json & j, const ArchDescriptor & arch)
{
  j = {
    {"input_dim", arch.input_dim},
    {"per_point_widths", arch.per_point_widths},
    {"global_widths", arch.global_widths},
    {"head", arch.head == HeadKind::kPerPointBinary ? "per_point_binary" : "vector"},
    {"output_dim", arch.output_dim},
    {"dropout_keep", arch.dropout_keep}};
}

void from_json(const nlohmann::json & j, ArchDescriptor & arch)
{
  arch.input_dim = j.value("input_dim", 3);
  arch.per_point_widths = j.at("per_point_widths").get<std::vector<int>>();
  arch.global_widths = j.at("global_widths").get<std::vector<int>>();
  const auto head = j.at("head").get<std::string>();
  if (head == "per_point_binary") {
    arch.head = HeadKind::kPerPointBinary;
  } else if (head == "vector") {
    arch.head = HeadKind::kVector;
  } else {
    throw Error(ErrorKind::kParse, "unknown head kind '" + head + "'");
  }
  arch.output_dim = j.at("output_dim").get<int>();
  arch.dropout_keep = j.value("dropout_keep", 0.7);
}

Layout Layout::of(const ArchDescriptor & arch)
{
  arch.validate();
  Layout layout;
  std::size_t cursor = 0;
  int width = arch.input_dim;
  for (int w : arch.per_point_widths) {
    append_layer(cursor, width, w, &layout.per_point, nullptr);
    width = w;
  }
  if (arch.head == HeadKind::kPerPointBinary) {
    width *= 2;
  }
  for (int w : arch.global_widths) {
    append_layer(cursor, width, w, &layout.global, nullptr);
    width = w;
  }
  append_layer(cursor, width, arch.output_dim, nullptr, &layout.output);
  layout.parameter_count = cursor;
  return layout;
}

nlohmann::json layout_json(const Layout & layout)
{
  auto slice = [](const LayerSlice & s) {
    return nlohmann::json{
      {"weight_offset", s.weight_offset},
      {"bias_offset", s.bias_offset},
      {"fan_in", s.fan_in},
      {"fan_out", s.fan_out}};
  };
  nlohmann::json per_point = nlohmann::json::array();
  for (const auto & s : layout.per_point) {
    per_point.push_back(slice(s));
  }
  nlohmann::json global = nlohmann::json::array();
  for (const auto & s : layout.global) {
    global.push_back(slice(s));
  }
  return {
    {"per_point", per_point},
    {"global", global},
    {"output", slice(layout.output)},
    {"parameter_count", layout.parameter_count}};
}

ModelParams ModelParams::zeros(const ArchDescriptor & arch)
{
  ModelParams p;
  p.arch = arch;
  p.layout = Layout::of(arch);
  p.values.assign(p.layout.parameter_count, 0.0);
  return p;
}

ModelParams ModelParams::initialize(const ArchDescriptor & arch, std::uint64_t seed)
{
  ModelParams p = zeros(arch);
  Rng rng(seed);
  auto fill = [&](const LayerSlice & s) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    const std::size_t n = static_cast<std::size_t>(s.fan_in) * static_cast<std::size_t>(s.fan_out);
    for (std::size_t i = 0; i < n; ++i) {
      p.values[s.weight_offset + i] = rng.uniform(-limit, limit);
    }
  };
  for (const auto & s : p.layout.per_point) {
    fill(s);
  }
  for (const auto & s : p.layout.global) {
    fill(s);
  }
  fill(p.layout.output);
  return p;
}

void ModelParams::validate() const
{
  if (values.size() != Layout::of(arch).parameter_count) {
    throw Error(ErrorKind::kDimension, "parameter vector length does not match architecture");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kNumericOverflow, "non-finite parameter value");
    }
  }
}

PointBatch PointBatch::single(const Matrix & points)
{
  return PointBatch{points, {0, static_cast<std::size_t>(points.rows())}};
}

PointBatch PointBatch::stack(std::span<const Matrix> sets)
{
  PointBatch batch;
  std::size_t rows = 0;
  batch.offsets.push_back(0);
  for (const auto & s : sets) {
    rows += static_cast<std::size_t>(s.rows());
    batch.offsets.push_back(rows);
  }
  const Eigen::Index cols = sets.empty() ? 0 : sets.front().cols();
  batch.points.resize(static_cast<Eigen::Index>(rows), cols);
  for (std::size_t e = 0; e < sets.size(); ++e) {
    if (sets[e].cols() != cols) {
      throw Error(ErrorKind::kDimension, "point sets in a batch differ in width");
    }
    batch.points.middleRows(static_cast<Eigen::Index>(batch.offsets[e]), sets[e].rows()) = sets[e];
  }
  return batch;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double keep, std::uint64_t seed)
{
  Rng rng(Rng::derive(seed, 0xd20b));
  Matrix mask(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const double scale = 1.0 / keep;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      mask(r, c) = rng.bernoulli(keep) ? scale : 0.0;
    }
  }
  return mask;
}

ForwardCache forward(
  const ModelParams & params, const PointBatch & batch, bool train_mode, std::uint64_t seed)
{
  const ArchDescriptor & arch = params.arch;
  const Layout & layout = params.layout;
  if (params.values.size() != layout.parameter_count) {
    throw Error(ErrorKind::kDimension, "parameter vector length does not match layout");
  }
  if (batch.points.cols() != arch.input_dim) {
    throw Error(
      ErrorKind::kDimension, "expected " + std::to_string(arch.input_dim) + " input columns, got " +
                               std::to_string(batch.points.cols()));
  }
  const std::size_t examples = batch.examples();
  if (examples == 0 || batch.offsets.back() != static_cast<std::size_t>(batch.points.rows())) {
    throw Error(ErrorKind::kDimension, "batch offsets do not cover the point rows");
  }
  for (std::size_t e = 0; e < examples; ++e) {
    if (batch.offsets[e + 1] <= batch.offsets[e]) {
      throw Error(ErrorKind::kDimension, "every point set needs at least one point");
    }
  }

  ForwardCache cache;
  cache.offsets = batch.offsets;
  cache.point_activations.reserve(layout.per_point.size() + 1);
  cache.point_activations.push_back(batch.points);
  for (const auto & s : layout.per_point) {
    cache.point_activations.push_back(affine(cache.point_activations.back(), params, s).cwiseMax(0.0));
  }

  const Matrix & features = cache.point_activations.back();
  const Eigen::Index width = features.cols();
  cache.pooled.resize(static_cast<Eigen::Index>(examples), width);
  cache.argmax.resize(static_cast<Eigen::Index>(examples), width);
  for (std::size_t e = 0; e < examples; ++e) {
    const auto begin = static_cast<Eigen::Index>(batch.offsets[e]);
    const auto end = static_cast<Eigen::Index>(batch.offsets[e + 1]);
    for (Eigen::Index c = 0; c < width; ++c) {
      Eigen::Index best = begin;
      double best_value = features(begin, c);
      for (Eigen::Index r = begin + 1; r < end; ++r) {
        if (features(r, c) > best_value) {
          best_value = features(r, c);
          best = r;
        }
      }
      cache.pooled(static_cast<Eigen::Index>(e), c) = best_value;
      cache.argmax(static_cast<Eigen::Index>(e), c) = static_cast<int>(best);
    }
  }

  const bool per_point_head = arch.head == HeadKind::kPerPointBinary;
  cache.global_activations.reserve(layout.global.size() + 1);
  cache.global_activations.push_back(per_point_head ? Matrix() : cache.pooled);
  for (std::size_t l = 0; l < layout.global.size(); ++l) {
    Matrix pre = (l == 0 && per_point_head)
                   ? concat_affine(features, cache.pooled, batch.offsets, params, layout.global[0])
                   : affine(cache.global_activations.back(), params, layout.global[l]);
    cache.global_activations.push_back(pre.cwiseMax(0.0));
  }

  if (layout.global.empty()) {
    cache.output = per_point_head
                     ? concat_affine(features, cache.pooled, batch.offsets, params, layout.output)
                     : affine(cache.pooled, params, layout.output);
  } else if (train_mode && arch.dropout_keep < 1.0) {
    const Matrix & last = cache.global_activations.back();
    cache.dropout_mask = dropout_mask(
      static_cast<std::size_t>(last.rows()), static_cast<std::size_t>(last.cols()), arch.dropout_keep,
      seed);
    cache.output = affine(last.cwiseProduct(cache.dropout_mask), params, layout.output);
  } else {
    cache.output = affine(cache.global_activations.back(), params, layout.output);
  }
  require_finite(cache.output, "network output");
  return cache;
}

Gradient backward_from_output(
  const ModelParams & params, const ForwardCache & cache, const Matrix & d_output,
  bool input_gradient)
{
  const Layout & layout = params.layout;
  if (d_output.rows() != cache.output.rows() || d_output.cols() != cache.output.cols()) {
    throw Error(ErrorKind::kDimension, "output gradient shape does not match the forward output");
  }
  require_finite(d_output, "output gradient");

  Gradient grad;
  grad.params.assign(layout.parameter_count, 0.0);

  const bool per_point_head = params.arch.head == HeadKind::kPerPointBinary;
  const Matrix & features = cache.point_activations.back();
  const Eigen::Index width = features.cols();
  Matrix d_features;
  Matrix d_pooled;

  if (layout.global.empty()) {
    if (per_point_head) {
      concat_backward(grad.params, params, layout.output, cache, d_output, d_features, d_pooled);
    } else {
      accumulate_layer(grad.params, layout.output, cache.pooled, d_output);
      d_pooled = d_output * weights(params, layout.output).transpose();
    }
  } else {
    const Matrix & last = cache.global_activations.back();
    const bool dropout = cache.dropout_mask.size() > 0;
    if (dropout) {
      accumulate_layer(grad.params, layout.output, last.cwiseProduct(cache.dropout_mask), d_output);
    } else {
      accumulate_layer(grad.params, layout.output, last, d_output);
    }
    Matrix d = d_output * weights(params, layout.output).transpose();
    if (dropout) {
      d = d.cwiseProduct(cache.dropout_mask);
    }
    for (std::size_t l = layout.global.size(); l-- > 0;) {
      d = d.cwiseProduct(relu_mask(cache.global_activations[l + 1]));
      if (l == 0 && per_point_head) {
        concat_backward(grad.params, params, layout.global[0], cache, d, d_features, d_pooled);
      } else {
        accumulate_layer(grad.params, layout.global[l], cache.global_activations[l], d);
        d = d * weights(params, layout.global[l]).transpose();
      }
    }
    if (!per_point_head) {
      d_pooled = std::move(d);
    }
  }
  if (!per_point_head) {
    d_features = Matrix::Zero(features.rows(), width);
  }
  for (Eigen::Index e = 0; e < d_pooled.rows(); ++e) {
    for (Eigen::Index c = 0; c < width; ++c) {
      d_features(cache.argmax(e, c), c) += d_pooled(e, c);
    }
  }

  Matrix dh = std::move(d_features);
  for (std::size_t l = layout.per_point.size(); l-- > 0;) {
    dh = dh.cwiseProduct(relu_mask(cache.point_activations[l + 1]));
    accumulate_layer(grad.params, layout.per_point[l], cache.point_activations[l], dh);
    if (l > 0 || input_gradient) {
      dh = dh * weights(params, layout.per_point[l]).transpose();
    }
  }
  if (input_gradient) {
    grad.input = std::move(dh);
  }
  for (double g : grad.params) {
    if (!std::isfinite(g)) {
      throw Error(ErrorKind::kNumericOverflow, "non-finite parameter gradient");
    }
  }
  return grad;
}

namespace
{

ForwardCache single_forward(
  const ModelParams & params, const Matrix & points, bool train_mode, std::uint64_t seed,
  HeadKind expected)
{
  if (params.arch.head != expected) {
    throw Error(ErrorKind::kDimension, "network head does not match the requested forward pass");
  }
  if (points.rows() < 1) {
    throw Error(ErrorKind::kDimension, "forward pass needs at least one point");
  }
  return forward(params, PointBatch::single(points), train_mode, seed);
}

}  // namespace

Matrix forward_seg(const ModelParams & params, const Matrix & points, bool train_mode, std::uint64_t seed)
{
  return single_forward(params, points, train_mode, seed, HeadKind::kPerPointBinary).output;
}

Vector forward_vec(const ModelParams & params, const Matrix & points, bool train_mode, std::uint64_t seed)
{
  return single_forward(params, points, train_mode, seed, HeadKind::kVector).output.row(0).transpose();
}

namespace
{

struct LossEvaluation
{
  double loss{0.0};
  Matrix d_output;
};

LossEvaluation apply_loss(const ModelParams & params, const Matrix & output, const LossSpec & spec)
{
  LossEvaluation out;
  if (const auto * seg = std::get_if<SegCrossEntropy>(&spec)) {
    if (params.arch.head != HeadKind::kPerPointBinary) {
      throw Error(ErrorKind::kDimension, "cross-entropy loss needs the per-point head");
    }
    out.loss = cross_entropy_per_point(output, seg->labels, out.d_output);
    return out;
  }
  const auto & reg = std::get<VecSmoothL1>(spec);
  if (params.arch.head != HeadKind::kVector) {
    throw Error(ErrorKind::kDimension, "smooth L1 loss needs the vector head");
  }
  const Vector pred = output.row(0).transpose();
  if (static_cast<std::size_t>(pred.size()) != reg.target.size()) {
    throw Error(ErrorKind::kDimension, "regression target length mismatch");
  }
  out.loss = smooth_l1(std::span<const double>(pred.data(), pred.size()), reg.target, reg.delta);
  out.d_output.resize(1, pred.size());
  const double n = static_cast<double>(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    out.d_output(0, i) = smooth_l1_derivative(pred(i) - reg.target[i], reg.delta) / n;
  }
  return out;
}

}  // namespace

double evaluate_loss(
  const ModelParams & params, const Matrix & input, const LossSpec & loss, bool train_mode,
  std::uint64_t seed)
{
  const ForwardCache cache = forward(params, PointBatch::single(input), train_mode, seed);
  return apply_loss(params, cache.output, loss).loss;
}

std::vector<double> backward(
  const ModelParams & params, const Matrix & input, const LossSpec & loss, bool train_mode,
  std::uint64_t seed)
{
  const ForwardCache cache = forward(params, PointBatch::single(input), train_mode, seed);
  const LossEvaluation eval = apply_loss(params, cache.output, loss);
  if (!std::isfinite(eval.loss)) {
    throw Error(ErrorKind::kNumericOverflow, "non-finite loss");
  }
  return backward_from_output(params, cache, eval.d_output).params;
}

}  // namespace cloudseed::nn
