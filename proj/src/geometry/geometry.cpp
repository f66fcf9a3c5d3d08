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

#include "cloudseed/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cloudseed::geometry
{
namespace
{

constexpr double kDegenerateArea = 1e-12;

double cross(const Vec2 & o, const Vec2 & a, const Vec2 & b)
{
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Vec2 line_intersection(const Vec2 & p, const Vec2 & q, const Vec2 & a, const Vec2 & b)
{
  const double a1 = cross(a, b, p);
  const double a2 = cross(a, b, q);
  const double t = a1 / (a1 - a2);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

IndexSet sorted_unique(IndexSet s)
{
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

std::array<Point3, 8> box_corners(const Box3D & box)
{
  const double c = std::cos(box.ry);
  const double s = std::sin(box.ry);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const double hh = 0.5 * box.h;
  const std::array<double, 4> local_x = {hl, hl, -hl, -hl};
  const std::array<double, 4> local_z = {-hw, hw, hw, -hw};

  std::array<Point3, 8> corners;
  for (int face = 0; face < 2; ++face) {
    const double y = face == 0 ? hh : -hh;
    for (int i = 0; i < 4; ++i) {
      // R_y(ry) * (x, y, z)
      const double x = c * local_x[i] + s * local_z[i];
      const double z = -s * local_x[i] + c * local_z[i];
      corners[face * 4 + i] = {box.cx + x, box.cy + y, box.cz + z};
    }
  }
  return corners;
}

std::array<Vec2, 4> bev_rectangle(const Box3D & box)
{
  const auto corners = box_corners(box);
  return {
    Vec2{corners[0].x, corners[0].z}, Vec2{corners[1].x, corners[1].z},
    Vec2{corners[2].x, corners[2].z}, Vec2{corners[3].x, corners[3].z}};
}

Point3 to_box_local(const Box3D & box, const Point3 & p)
{
  const double c = std::cos(box.ry);
  const double s = std::sin(box.ry);
  const double dx = p.x - box.cx;
  const double dz = p.z - box.cz;
  return {c * dx - s * dz, p.y - box.cy, s * dx + c * dz};
}

bool contains(const Box3D & box, const Point3 & p)
{
  const Point3 local = to_box_local(box, p);
  return std::abs(local.x) <= 0.5 * box.l && std::abs(local.y) <= 0.5 * box.h &&
         std::abs(local.z) <= 0.5 * box.w;
}

IndexSet points_in_box(std::span<const Point3> points, const Box3D & box)
{
  IndexSet out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (contains(box, points[i])) {
      out.push_back(i);
    }
  }
  return out;
}

IndexSet points_in_box(const PointCloud & cloud, const Box3D & box)
{
  return points_in_box(std::span<const Point3>(cloud.points), box);
}

double polygon_area(std::span<const Vec2> polygon)
{
  if (polygon.size() < 3) {
    return 0.0;
  }
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2 & p = polygon[i];
    const Vec2 & q = polygon[(i + 1) % polygon.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * twice;
}

// Sutherland-Hodgman: clip `a` successively by every edge of `b`.
double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b)
{
  std::vector<Vec2> output(a.begin(), a.end());
  std::vector<Vec2> input;
  for (std::size_t e = 0; e < b.size() && !output.empty(); ++e) {
    const Vec2 & edge_start = b[e];
    const Vec2 & edge_end = b[(e + 1) % b.size()];
    input.swap(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2 & current = input[i];
      const Vec2 & previous = input[(i + input.size() - 1) % input.size()];
      const bool current_inside = cross(edge_start, edge_end, current) >= 0.0;
      const bool previous_inside = cross(edge_start, edge_end, previous) >= 0.0;
      if (current_inside) {
        if (!previous_inside) {
          output.push_back(line_intersection(previous, current, edge_start, edge_end));
        }
        output.push_back(current);
      } else if (previous_inside) {
        output.push_back(line_intersection(previous, current, edge_start, edge_end));
      }
    }
  }
  const double area = polygon_area(output);
  return area < kDegenerateArea ? 0.0 : area;
}

double bev_intersection_area(const Box3D & a, const Box3D & b)
{
  const auto ra = bev_rectangle(a);
  const auto rb = bev_rectangle(b);
  const double area = convex_intersection_area(ra, rb);
  return std::min({area, a.l * a.w, b.l * b.w});
}

double box_iou_3d(const Box3D & a, const Box3D & b)
{
  // Clipping a rotated rectangle against itself rounds; the exact answer is known.
  if (a == b && a.valid()) {
    return 1.0;
  }
  const double top = std::max(a.cy - 0.5 * a.h, b.cy - 0.5 * b.h);
  const double bottom = std::min(a.cy + 0.5 * a.h, b.cy + 0.5 * b.h);
  const double vertical = bottom - top;
  if (vertical <= 0.0) {
    return 0.0;
  }
  const double intersection = bev_intersection_area(a, b) * vertical;
  if (intersection <= 0.0) {
    return 0.0;
  }
  const double uni = a.volume() + b.volume() - intersection;
  return std::clamp(intersection / uni, 0.0, 1.0);
}

double instance_iou(const IndexSet & pred, const IndexSet & gt)
{
  const IndexSet p = sorted_unique(pred);
  const IndexSet g = sorted_unique(gt);
  if (p.empty() && g.empty()) {
    return 1.0;
  }
  std::size_t shared = 0;
  auto pi = p.begin();
  auto gi = g.begin();
  while (pi != p.end() && gi != g.end()) {
    if (*pi < *gi) {
      ++pi;
    } else if (*gi < *pi) {
      ++gi;
    } else {
      ++shared;
      ++pi;
      ++gi;
    }
  }
  const std::size_t uni = p.size() + g.size() - shared;
  return static_cast<double>(shared) / static_cast<double>(uni);
}

double centroid_distance(const Box3D & a, const Box3D & b)
{
  return (a.center() - b.center()).norm();
}

}  // namespace cloudseed::geometry
