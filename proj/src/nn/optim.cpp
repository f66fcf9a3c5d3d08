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

#include "cloudseed/nn/optim.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "cloudseed/error.hpp"

namespace cloudseed::nn
{

AdamState AdamState::for_size(std::size_t n)
{
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step_inplace(
  AdamState & state, std::span<double> params, std::span<const double> grads, double lr)
{
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorKind::kDimension, "ADAM state, parameters and gradients differ in length");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

AdamResult adam_step(
  const AdamState & state, std::span<const double> params, std::span<const double> grads, double lr)
{
  AdamResult result{std::vector<double>(params.begin(), params.end()), state};
  adam_step_inplace(result.state, result.params, grads, lr);
  return result;
}

void TrainConfig::validate() const
{
  if (!(initial_lr > 0.0) || !(decay_factor > 0.0 && decay_factor <= 1.0) || decay_every < 1 ||
      max_iters < 0 || early_stop_patience < 1 || validate_every < 1 || batch_size < 1) {
    throw Error(ErrorKind::kConfig, "invalid training configuration");
  }
}

void to_json(nlohmann::json & j, const TrainConfig & c)
{
  j = {
    {"initial_lr", c.initial_lr},
    {"decay_factor", c.decay_factor},
    {"decay_every", c.decay_every},
    {"max_iters", c.max_iters},
    {"early_stop_patience", c.early_stop_patience},
    {"validate_every", c.validate_every},
    {"batch_size", c.batch_size},
    {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json & j, TrainConfig & c)
{
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.max_iters = j.value("max_iters", c.max_iters);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.validate_every = j.value("validate_every", c.validate_every);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
}

double lr_at(const TrainConfig & config, std::int64_t iteration)
{
  if (iteration < 0) {
    throw Error(ErrorKind::kParameter, "iteration must be non-negative");
  }
  const std::int64_t steps = iteration / config.decay_every;
  const double raw = config.initial_lr * std::pow(config.decay_factor, static_cast<double>(steps));
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.15g", raw);
  return std::strtod(buffer, nullptr);
}

}  // namespace cloudseed::nn
