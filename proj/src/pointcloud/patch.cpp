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

#include "cloudseed/patch.hpp"

#include <cmath>
#include <string>

#include "cloudseed/error.hpp"

namespace cloudseed::pointcloud
{

CenteredPatch crop_volume(const PointCloud & cloud, const Point3 & click, double k)
{
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw Error(ErrorKind::kParameter, "volume size must be positive");
  }
  if (cloud.frame != Frame::kCamera) {
    throw Error(ErrorKind::kFrameMismatch, "crop_volume expects a camera-frame cloud");
  }
  const double half = 0.5 * k;
  CenteredPatch patch;
  patch.click = click;
  patch.k = k;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 d = cloud.points[i] - click;
    if (std::abs(d.x) <= half && std::abs(d.y) <= half && std::abs(d.z) <= half) {
      patch.points.push_back(d);
      patch.source_indices.push_back(i);
    }
  }
  if (patch.points.empty()) {
    throw Error(ErrorKind::kEmptyPatch, "no points within " + std::to_string(k) + " m volume");
  }
  return patch;
}

VolumeSizes default_volume_sizes()
{
  return {{Category::kCar, 8.0}, {Category::kPedestrian, 4.0}, {Category::kCyclist, 5.0}};
}

}  // namespace cloudseed::pointcloud
