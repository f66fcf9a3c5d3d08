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

#ifndef CLOUDSEED__TYPES_HPP_
#define CLOUDSEED__TYPES_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cloudseed
{

struct Point3
{
  double x{0.0};
  double y{0.0};
  double z{0.0};

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }

  Point3 & operator+=(const Point3 & o)
  {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  Point3 & operator-=(const Point3 & o)
  {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  friend Point3 operator+(Point3 a, const Point3 & b) { return a += b; }
  friend Point3 operator-(Point3 a, const Point3 & b) { return a -= b; }
  friend Point3 operator*(Point3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Point3 &, const Point3 &) = default;
};

enum class Frame : std::uint8_t { kLidar = 0, kCamera = 1 };

/// The three evaluated object classes.
enum class Category : std::uint8_t { kCar = 0, kPedestrian = 1, kCyclist = 2 };

inline constexpr std::array<Category, 3> kAllCategories = {
  Category::kCar, Category::kPedestrian, Category::kCyclist};

std::string_view to_string(Category category);
std::string_view to_string(Frame frame);

/// Accepts lower-case names ("car") and KITTI type names ("Car").
std::optional<Category> category_from_string(std::string_view name);

/// Maps an angle to (-pi, pi].
double normalize_angle(double angle);

struct PointCloud
{
  std::vector<Point3> points;
  std::optional<std::vector<double>> intensity;
  Frame frame{Frame::kLidar};

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Throws kDimension / kMalformedFile if intensity length or finiteness is violated.
  void validate() const;

  friend bool operator==(const PointCloud &, const PointCloud &) = default;
};

/// Oriented box in the camera frame (x right, y down, z forward).
///
/// (cx, cy, cz) is the geometric centroid. The length axis lies along camera x when
/// ry = 0 and the box rotates about the camera y axis.
struct Box3D
{
  double cx{0.0};
  double cy{0.0};
  double cz{0.0};
  double h{1.0};
  double w{1.0};
  double l{1.0};
  double ry{0.0};

  Point3 center() const { return {cx, cy, cz}; }
  double volume() const { return h * w * l; }
  bool valid() const;

  friend bool operator==(const Box3D &, const Box3D &) = default;
};

struct GroundTruthObject
{
  Category category{Category::kCar};
  Box3D box;

  friend bool operator==(const GroundTruthObject &, const GroundTruthObject &) = default;
};

/// Sorted, duplicate-free indices into a point cloud.
using IndexSet = std::vector<std::size_t>;

}  // namespace cloudseed

#endif  // CLOUDSEED__TYPES_HPP_
