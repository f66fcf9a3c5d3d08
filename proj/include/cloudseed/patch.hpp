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

#ifndef CLOUDSEED__PATCH_HPP_
#define CLOUDSEED__PATCH_HPP_

#include <map>
#include <vector>

#include "cloudseed/types.hpp"

namespace cloudseed::pointcloud
{

/// Points of a closed k x k x k cube around a click, re-centered on the click.
struct CenteredPatch
{
  std::vector<Point3> points;
  IndexSet source_indices;
  Point3 click;
  double k{0.0};
};

/// Throws kEmptyPatch when the cube holds no points.
CenteredPatch crop_volume(const PointCloud & cloud, const Point3 & click, double k);

/// Per-class volume edge length in meters.
using VolumeSizes = std::map<Category, double>;

VolumeSizes default_volume_sizes();

}  // namespace cloudseed::pointcloud

#endif  // CLOUDSEED__PATCH_HPP_
