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

#include "cloudseed/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "cloudseed/error.hpp"

namespace cloudseed::nn
{

TrainHistory run_training(
  const TrainConfig & config, std::vector<double> & params, const StepFunction & step,
  const ValidationFunction & validate)
{
  config.validate();
  TrainHistory history;
  AdamState adam = AdamState::for_size(params.size());
  std::vector<double> grad(params.size());
  std::vector<double> best = params;

  auto check_validation = [&](std::int64_t iteration) {
    const double loss = validate(params);
    if (!std::isfinite(loss)) {
      throw Error(
        ErrorKind::kDivergence, "validation loss is not finite at iteration " + std::to_string(iteration));
    }
    history.validation.push_back({iteration, loss});
    if (loss < history.best_validation_loss) {
      history.best_validation_loss = loss;
      history.best_iteration = iteration;
      best = params;
    }
  };

  for (std::int64_t it = 0; it < config.max_iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double lr = lr_at(config, it);
    const double loss = step(it, params, grad);
    const bool finite_grad = std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
    if (!std::isfinite(loss) || !finite_grad) {
      throw Error(
        ErrorKind::kDivergence, "training diverged at iteration " + std::to_string(it) + " (lr " +
                                  std::to_string(lr) + ", loss " + std::to_string(loss) + ")");
    }
    history.steps.push_back({it, loss, lr});
    adam_step_inplace(adam, params, grad, lr);

    const std::int64_t done = it + 1;
    if (validate && (done % config.validate_every == 0 || done == config.max_iters)) {
      check_validation(done);
      if (done - history.best_iteration >= config.early_stop_patience) {
        history.early_stopped = true;
        break;
      }
    }
  }
  if (validate) {
    if (history.best_iteration < 0) {
      check_validation(0);
    }
    params = best;
  }
  return history;
}

nlohmann::json history_json(const TrainHistory & history)
{
  nlohmann::json validation = nlohmann::json::array();
  for (const auto & v : history.validation) {
    validation.push_back({{"iteration", v.iteration}, {"loss", v.loss}});
  }
  return {
    {"iterations", history.steps.size()},
    {"best_iteration", history.best_iteration},
    {"best_validation_loss",
     std::isfinite(history.best_validation_loss) ? nlohmann::json(history.best_validation_loss)
                                                 : nlohmann::json(nullptr)},
    {"early_stopped", history.early_stopped},
    {"validation", validation}};
}

std::string history_csv(const TrainHistory & history)
{
  std::ostringstream out;
  out.precision(17);
  out << "iteration,loss,lr\n";
  for (const auto & s : history.steps) {
    out << s.iteration << ',' << s.loss << ',' << s.lr << '\n';
  }
  return out.str();
}

}  // namespace cloudseed::nn
