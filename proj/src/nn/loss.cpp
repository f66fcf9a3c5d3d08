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

#include "cloudseed/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cloudseed/error.hpp"

namespace cloudseed::nn
{

double cross_entropy_per_point(const Matrix & logits, std::span<const int> labels, Matrix & grad)
{
  if (logits.cols() != 2 || static_cast<std::size_t>(logits.rows()) != labels.size() ||
      labels.empty()) {
    throw Error(ErrorKind::kDimension, "cross-entropy expects n x 2 logits and n labels");
  }
  const auto n = logits.rows();
  grad.resize(n, 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label != 0 && label != 1) {
      throw Error(ErrorKind::kParameter, "labels must be 0 or 1");
    }
    const double a = logits(i, 0);
    const double b = logits(i, 1);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    total += lse - logits(i, label);
    const double p0 = std::exp(a - lse);
    const double p1 = std::exp(b - lse);
    grad(i, 0) = (p0 - (label == 0 ? 1.0 : 0.0)) * inv_n;
    grad(i, 1) = (p1 - (label == 1 ? 1.0 : 0.0)) * inv_n;
  }
  return total * inv_n;
}

double cross_entropy_per_point(const Matrix & logits, std::span<const int> labels)
{
  Matrix unused;
  return cross_entropy_per_point(logits, labels, unused);
}

double smooth_l1_term(double d, double delta)
{
  const double a = std::abs(d);
  return a < delta ? 0.5 * d * d / delta : a - 0.5 * delta;
}

double smooth_l1_derivative(double d, double delta)
{
  if (std::abs(d) < delta) {
    return d / delta;
  }
  return d > 0.0 ? 1.0 : -1.0;
}

double smooth_l1(std::span<const double> pred, std::span<const double> target, double delta)
{
  if (pred.size() != target.size()) {
    throw Error(
      ErrorKind::kDimension, "smooth_l1 length mismatch: " + std::to_string(pred.size()) + " vs " +
                               std::to_string(target.size()));
  }
  if (!(delta > 0.0)) {
    throw Error(ErrorKind::kParameter, "smooth_l1 delta must be positive");
  }
  if (pred.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    total += smooth_l1_term(pred[i] - target[i], delta);
  }
  return total / static_cast<double>(pred.size());
}

std::vector<double> softmax(std::span<const double> logits)
{
  std::vector<double> out(logits.size());
  if (logits.empty()) {
    return out;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double & v : out) {
    v /= sum;
  }
  return out;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target, std::span<double> grad)
{
  if (target >= logits.size()) {
    throw Error(ErrorKind::kDimension, "softmax target index out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) {
    sum += std::exp(v - m);
  }
  const double lse = m + std::log(sum);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
      grad[i] = std::exp(logits[i] - lse) - (i == target ? 1.0 : 0.0);
    }
  }
  return lse - logits[target];
}

}  // namespace cloudseed::nn
