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

#ifndef CLOUDSEED__SYNTHETIC_HPP_
#define CLOUDSEED__SYNTHETIC_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cloudseed/types.hpp"

namespace cloudseed::pointcloud
{

struct SizeMode
{
  double h{1.5};
  double w{1.6};
  double l{3.9};
  double weight{1.0};
};

struct ObjectClassSpec
{
  Category category{Category::kCar};
  int count_min{0};
  int count_max{0};
  std::vector<SizeMode> sizes;
  double size_jitter{0.04};  // relative standard deviation of each dimension
};

/// Parameters of a synthetic 2.5D street scene, camera frame, sensor at the origin.
struct SceneSpec
{
  std::vector<ObjectClassSpec> objects;
  double x_min{-18.0};
  double x_max{18.0};
  double z_min{5.0};
  double z_max{40.0};
  double ground_y{1.73};
  double surface_density{40.0};   // points per square meter of visible object surface
  double ground_density{2.0};     // clutter points per square meter of ground
  double surface_noise{0.01};     // inward jitter, meters
  double ground_noise{0.02};
  int distractor_count{6};        // poles and bushes that are not annotated
  double min_gap{0.4};            // clearance between placed footprints, meters
  int max_placement_retries{200};

  /// Cars in two size modes, pedestrians and cyclists.
  static SceneSpec street();
};

void to_json(nlohmann::json & j, const SceneSpec & spec);
void from_json(const nlohmann::json & j, SceneSpec & spec);

struct SyntheticScene
{
  PointCloud cloud;
  std::vector<GroundTruthObject> objects;
};

/// Deterministic in (spec, seed). Points are float-representable.
SyntheticScene synthetic_scene(const SceneSpec & spec, std::uint64_t seed);

}  // namespace cloudseed::pointcloud

#endif  // CLOUDSEED__SYNTHETIC_HPP_
