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

#ifndef CLOUDSEED__NN__NETWORK_HPP_
#define CLOUDSEED__NN__NETWORK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cloudseed::nn
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class HeadKind
{
  kPerPointBinary,  // per-point logits after concatenating the pooled feature
  kVector,          // one output vector per point set
};

/// Shape of a point-set network.
///
/// Per-point layers are shared affine + ReLU maps. Their last output is max-pooled
/// per example. The segmentation head concatenates the pooled feature onto every
/// point's last per-point feature before the global layers; the vector head feeds
/// the pooled feature alone. Dropout (train mode only) acts on the last global
/// hidden layer.
struct ArchDescriptor
{
  int input_dim{3};
  std::vector<int> per_point_widths{32, 64, 128};
  std::vector<int> global_widths{128, 64};
  HeadKind head{HeadKind::kPerPointBinary};
  int output_dim{2};
  double dropout_keep{0.7};

  void validate() const;

  static ArchDescriptor segmentation();
  static ArchDescriptor vector_head(int output_dim);

  friend bool operator==(const ArchDescriptor &, const ArchDescriptor &) = default;
};

void to_json(nlohmann::json & j, const ArchDescriptor & arch);
void from_json(const nlohmann::json & j, ArchDescriptor & arch);

struct LayerSlice
{
  std::size_t weight_offset{0};  // fan_in x fan_out, column-major
  std::size_t bias_offset{0};
  int fan_in{0};
  int fan_out{0};
};

struct Layout
{
  std::vector<LayerSlice> per_point;
  std::vector<LayerSlice> global;
  LayerSlice output;
  std::size_t parameter_count{0};

  static Layout of(const ArchDescriptor & arch);
};

nlohmann::json layout_json(const Layout & layout);

struct ModelParams
{
  ArchDescriptor arch;
  Layout layout;
  std::vector<double> values;

  /// Glorot-uniform weights, zero biases.
  static ModelParams initialize(const ArchDescriptor & arch, std::uint64_t seed);
  static ModelParams zeros(const ArchDescriptor & arch);

  /// Throws kDimension on length mismatch, kNumericOverflow on non-finite values.
  void validate() const;
};

/// Point sets stacked row-wise; example e owns rows [offsets[e], offsets[e + 1]).
struct PointBatch
{
  Matrix points;
  std::vector<std::size_t> offsets;

  static PointBatch single(const Matrix & points);
  static PointBatch stack(std::span<const Matrix> sets);
  std::size_t examples() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

struct ForwardCache
{
  std::vector<std::size_t> offsets;        // copied from the batch
  std::vector<Matrix> point_activations;   // [input, H_1, ..., H_P]
  Eigen::MatrixXi argmax;                  // examples x pooled width, row index of the max
  Matrix pooled;                           // examples x pooled width
  std::vector<Matrix> global_activations;  // [Z_0, ..., Z_G], pre-dropout; Z_0 empty for the per-point head
  Matrix dropout_mask;                     // empty unless dropout was applied to Z_G
  Matrix output;                           // rows x output_dim, rows = points or examples
};

ForwardCache forward(
  const ModelParams & params, const PointBatch & batch, bool train_mode, std::uint64_t seed);

struct Gradient
{
  std::vector<double> params;
  Matrix input;  // empty unless requested
};

/// Reverse pass given dLoss/dOutput for the cached forward evaluation.
Gradient backward_from_output(
  const ModelParams & params, const ForwardCache & cache, const Matrix & d_output,
  bool input_gradient = false);

/// n x 2 per-point logits.
Matrix forward_seg(
  const ModelParams & params, const Matrix & points, bool train_mode = false,
  std::uint64_t seed = 0);

Vector forward_vec(
  const ModelParams & params, const Matrix & points, bool train_mode = false,
  std::uint64_t seed = 0);

/// Inverted-dropout mask (entries 0 or 1/keep) for a rows x cols activation.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double keep, std::uint64_t seed);

struct SegCrossEntropy
{
  std::vector<int> labels;
};

struct VecSmoothL1
{
  std::vector<double> target;
  double delta{1.0};
};

using LossSpec = std::variant<SegCrossEntropy, VecSmoothL1>;

double evaluate_loss(
  const ModelParams & params, const Matrix & input, const LossSpec & loss, bool train_mode = false,
  std::uint64_t seed = 0);

/// Exact gradient of the scalar loss, laid out like params.values.
std::vector<double> backward(
  const ModelParams & params, const Matrix & input, const LossSpec & loss, bool train_mode = false,
  std::uint64_t seed = 0);

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__NETWORK_HPP_
