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

#ifndef CLOUDSEED__NN__OPTIM_HPP_
#define CLOUDSEED__NN__OPTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace cloudseed::nn
{

struct AdamState
{
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t{0};
  double beta1{0.9};
  double beta2{0.999};
  double epsilon{1e-8};

  static AdamState for_size(std::size_t n);
};

/// In-place ADAM update with bias correction.
void adam_step_inplace(
  AdamState & state, std::span<double> params, std::span<const double> grads, double lr);

struct AdamResult
{
  std::vector<double> params;
  AdamState state;
};

AdamResult adam_step(
  const AdamState & state, std::span<const double> params, std::span<const double> grads,
  double lr);

struct TrainConfig
{
  double initial_lr{0.01};
  double decay_factor{0.7};
  std::int64_t decay_every{12'500};
  std::int64_t max_iters{5'000};
  std::int64_t early_stop_patience{2'000};
  std::int64_t validate_every{100};
  std::size_t batch_size{32};
  std::uint64_t rng_seed{0};

  void validate() const;
};

void to_json(nlohmann::json & j, const TrainConfig & c);
void from_json(const nlohmann::json & j, TrainConfig & c);

/// Staircase schedule initial_lr * decay_factor^floor(iteration / decay_every).
///
/// The product is rounded to 15 significant decimal digits so that decimal
/// configurations yield the nearest double to the decimal rate (0.01 * 0.7 -> 0.007).
double lr_at(const TrainConfig & config, std::int64_t iteration);

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__OPTIM_HPP_
