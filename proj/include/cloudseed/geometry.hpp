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

#ifndef CLOUDSEED__GEOMETRY_HPP_
#define CLOUDSEED__GEOMETRY_HPP_

#include <array>
#include <span>
#include <vector>

#include "cloudseed/types.hpp"

namespace cloudseed::geometry
{

struct Vec2
{
  double x{0.0};
  double y{0.0};
};

/// Box corners in the camera frame.
///
/// Corners 0-3 are the bottom face (y = cy + h/2, camera y points down) in
/// counter-clockwise order viewed from above; corners 4-7 repeat them on the top face.
/// In box-local coordinates the bottom face is (l/2, -w/2), (l/2, w/2), (-l/2, w/2),
/// (-l/2, -w/2) over (length, width).
std::array<Point3, 8> box_corners(const Box3D & box);

/// Bird's-eye rectangle of the box in (camera x, camera z), counter-clockwise.
std::array<Vec2, 4> bev_rectangle(const Box3D & box);

/// Box-local coordinates (length, height, width) of a camera-frame point.
Point3 to_box_local(const Box3D & box, const Point3 & p);

/// Boundary-inclusive containment.
bool contains(const Box3D & box, const Point3 & p);

IndexSet points_in_box(const PointCloud & cloud, const Box3D & box);
IndexSet points_in_box(std::span<const Point3> points, const Box3D & box);

/// Area of the intersection of two convex counter-clockwise polygons.
double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b);

double polygon_area(std::span<const Vec2> polygon);

double bev_intersection_area(const Box3D & a, const Box3D & b);

double box_iou_3d(const Box3D & a, const Box3D & b);

/// |pred ∩ gt| / |pred ∪ gt|, 1.0 when both are empty.
double instance_iou(const IndexSet & pred, const IndexSet & gt);

double centroid_distance(const Box3D & a, const Box3D & b);

}  // namespace cloudseed::geometry

#endif  // CLOUDSEED__GEOMETRY_HPP_
