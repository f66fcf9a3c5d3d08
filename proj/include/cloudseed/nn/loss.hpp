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

#ifndef CLOUDSEED__NN__LOSS_HPP_
#define CLOUDSEED__NN__LOSS_HPP_

#include <span>
#include <vector>

#include "cloudseed/nn/network.hpp"

namespace cloudseed::nn
{

/// Mean over points of -log softmax(logits)[label]; logits are n x 2.
double cross_entropy_per_point(const Matrix & logits, std::span<const int> labels);

/// Same loss, plus dLoss/dLogits written to `grad` (resized to n x 2).
double cross_entropy_per_point(const Matrix & logits, std::span<const int> labels, Matrix & grad);

/// Mean over components of the Huber-style smooth L1 with threshold delta.
double smooth_l1(std::span<const double> pred, std::span<const double> target, double delta = 1.0);

/// Derivative of the per-component term with respect to d = pred - target.
double smooth_l1_derivative(double d, double delta = 1.0);

double smooth_l1_term(double d, double delta = 1.0);

std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[target]; when grad is non-empty it receives softmax - onehot.
double softmax_cross_entropy(
  std::span<const double> logits, std::size_t target, std::span<double> grad = {});

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__LOSS_HPP_
