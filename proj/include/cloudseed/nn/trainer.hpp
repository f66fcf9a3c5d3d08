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

#ifndef CLOUDSEED__NN__TRAINER_HPP_
#define CLOUDSEED__NN__TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <json.hpp>

#include "cloudseed/nn/optim.hpp"

namespace cloudseed::nn
{

struct HistoryEntry
{
  std::int64_t iteration{0};
  double loss{0.0};
  double lr{0.0};
};

struct ValidationEntry
{
  std::int64_t iteration{0};
  double loss{0.0};
};

struct TrainHistory
{
  std::vector<HistoryEntry> steps;
  std::vector<ValidationEntry> validation;
  std::int64_t best_iteration{-1};
  double best_validation_loss{std::numeric_limits<double>::infinity()};
  bool early_stopped{false};
};

nlohmann::json history_json(const TrainHistory & history);
std::string history_csv(const TrainHistory & history);

/// Fills `grad` (zeroed by the caller loop) and returns the mini-batch loss.
using StepFunction =
  std::function<double(std::int64_t iteration, std::span<const double> params, std::span<double> grad)>;
using ValidationFunction = std::function<double(std::span<const double> params)>;

/// ADAM on the staircase schedule with early stopping on validation loss.
///
/// On return `params` holds the best-validation weights (or the last weights when no
/// validation function is given). Throws kDivergence on a non-finite loss or gradient.
TrainHistory run_training(
  const TrainConfig & config, std::vector<double> & params, const StepFunction & step,
  const ValidationFunction & validate);

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__TRAINER_HPP_
