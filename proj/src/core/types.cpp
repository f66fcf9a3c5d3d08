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

#include "cloudseed/types.hpp"

#include <numbers>

#include "cloudseed/error.hpp"

namespace cloudseed
{

std::string_view to_string(Category category)
{
  switch (category) {
    case Category::kCar:
      return "car";
    case Category::kPedestrian:
      return "pedestrian";
    case Category::kCyclist:
      return "cyclist";
  }
  return "unknown";
}

std::string_view to_string(Frame frame)
{
  return frame == Frame::kLidar ? "lidar" : "camera";
}

std::optional<Category> category_from_string(std::string_view name)
{
  if (name == "car" || name == "Car") {
    return Category::kCar;
  }
  if (name == "pedestrian" || name == "Pedestrian") {
    return Category::kPedestrian;
  }
  if (name == "cyclist" || name == "Cyclist") {
    return Category::kCyclist;
  }
  return std::nullopt;
}

double normalize_angle(double angle)
{
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a <= -std::numbers::pi) {
    a += kTwoPi;
  } else if (a > std::numbers::pi) {
    a -= kTwoPi;
  }
  return a;
}

void PointCloud::validate() const
{
  if (intensity && intensity->size() != points.size()) {
    throw Error(ErrorKind::kDimension, "intensity length differs from point count");
  }
  for (const auto & p : points) {
    if (!p.finite()) {
      throw Error(ErrorKind::kMalformedFile, "non-finite point coordinate");
    }
  }
}

bool Box3D::valid() const
{
  return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(cz) && h > 0.0 && w > 0.0 &&
         l > 0.0 && std::isfinite(ry);
}

}  // namespace cloudseed
