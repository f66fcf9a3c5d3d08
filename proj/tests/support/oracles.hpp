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

#ifndef CLOUDSEED_TESTS__ORACLES_HPP_
#define CLOUDSEED_TESTS__ORACLES_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "cloudseed/rng.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::testing
{

// Containment via the six face half-spaces. Face normals come from the yaw directly:
// the length axis is (cos ry, 0, -sin ry) and the width axis (sin ry, 0, cos ry) in camera
// coordinates (y down); each face plane passes through centroid +- half extent along its normal.
inline bool halfspace_contains(const Box3D & b, const Point3 & p, double eps = 0.0)
{
  const std::array<double, 3> length_axis{std::cos(b.ry), 0.0, -std::sin(b.ry)};
  const std::array<double, 3> width_axis{std::sin(b.ry), 0.0, std::cos(b.ry)};
  const std::array<double, 3> height_axis{0.0, 1.0, 0.0};
  const std::array<double, 3> d{p.x - b.cx, p.y - b.cy, p.z - b.cz};
  auto dot = [&](const std::array<double, 3> & a) { return a[0] * d[0] + a[1] * d[1] + a[2] * d[2]; };
  return std::abs(dot(length_axis)) <= 0.5 * b.l + eps && std::abs(dot(width_axis)) <= 0.5 * b.w + eps &&
         std::abs(dot(height_axis)) <= 0.5 * b.h + eps;
}

inline std::vector<std::size_t> halfspace_members(const std::vector<Point3> & points, const Box3D & b)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (halfspace_contains(b, points[i])) {
      out.push_back(i);
    }
  }
  return out;
}

// Monte-Carlo IoU: uniform samples in the axis-aligned hull of both boxes.
inline double monte_carlo_iou(const Box3D & a, const Box3D & b, std::size_t samples, std::uint64_t seed)
{
  auto extent = [](const Box3D & box) { return 0.5 * std::hypot(box.l, box.w); };
  const double x0 = std::min(a.cx - extent(a), b.cx - extent(b));
  const double x1 = std::max(a.cx + extent(a), b.cx + extent(b));
  const double y0 = std::min(a.cy - 0.5 * a.h, b.cy - 0.5 * b.h);
  const double y1 = std::max(a.cy + 0.5 * a.h, b.cy + 0.5 * b.h);
  const double z0 = std::min(a.cz - extent(a), b.cz - extent(b));
  const double z1 = std::max(a.cz + extent(a), b.cz + extent(b));
  Rng rng(seed);
  std::size_t in_a = 0;
  std::size_t in_b = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point3 p{rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(z0, z1)};
    const bool ia = halfspace_contains(a, p);
    const bool ib = halfspace_contains(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const std::size_t uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

// IoU of two boxes sharing centroid and yaw: the intersection is the box of per-axis minima.
inline double cocentered_iou(double h1, double w1, double l1, double h2, double w2, double l2)
{
  const double inter = std::min(h1, h2) * std::min(w1, w2) * std::min(l1, l2);
  return inter / (h1 * w1 * l1 + h2 * w2 * l2 - inter);
}

}  // namespace cloudseed::testing

#endif  // CLOUDSEED_TESTS__ORACLES_HPP_
