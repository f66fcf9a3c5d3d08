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

#include "cloudseed/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::pointcloud
{
namespace
{

// Kept out of line: GCC 11 SLP vectorization at -O3 drops the float round trip when inlined.
[[gnu::noinline]] double to_float_grid(double v) { return static_cast<double>(static_cast<float>(v)); }

struct Face
{
  Point3 center;  // box-local (length, vertical, width)
  Point3 normal;
  Point3 axis_a;
  Point3 axis_b;
  double extent_a;
  double extent_b;
};

Point3 rotate_y(const Point3 & local, double ry)
{
  const double c = std::cos(ry);
  const double s = std::sin(ry);
  return {c * local.x + s * local.z, local.y, -s * local.x + c * local.z};
}

std::array<Face, 5> exposed_faces(const Box3D & box)
{
  const double hl = 0.5 * box.l;
  const double hh = 0.5 * box.h;
  const double hw = 0.5 * box.w;
  const Point3 u{1, 0, 0};
  const Point3 v{0, 1, 0};
  const Point3 s{0, 0, 1};
  // Bottom face rests on the ground and is never scanned.
  return {{
    {{hl, 0, 0}, u, v, s, box.h, box.w},
    {{-hl, 0, 0}, u * -1.0, v, s, box.h, box.w},
    {{0, 0, hw}, s, u, v, box.l, box.h},
    {{0, 0, -hw}, s * -1.0, u, v, box.l, box.h},
    {{0, -hh, 0}, v * -1.0, u, s, box.l, box.w},
  }};
}

// Samples the faces of `box` that face a sensor at the origin.
void sample_visible_surface(
  const Box3D & box, double density, double noise, double intensity, Rng & rng,
  PointCloud & cloud, std::vector<double> & intensities)
{
  const Point3 center = box.center();
  for (const Face & face : exposed_faces(box)) {
    const Point3 world_center = center + rotate_y(face.center, box.ry);
    const Point3 world_normal = rotate_y(face.normal, box.ry);
    const double facing = world_normal.x * world_center.x + world_normal.y * world_center.y +
                          world_normal.z * world_center.z;
    if (facing >= 0.0) {
      continue;
    }
    const double area = face.extent_a * face.extent_b;
    const auto count = static_cast<std::size_t>(std::floor(density * area + rng.uniform()));
    const double thickness = std::abs(
      face.normal.x * 0.5 * box.l + face.normal.y * 0.5 * box.h + face.normal.z * 0.5 * box.w);
    for (std::size_t i = 0; i < count; ++i) {
      const double a = rng.uniform(-0.5, 0.5) * face.extent_a;
      const double b = rng.uniform(-0.5, 0.5) * face.extent_b;
      const double depth = std::min(1e-4 + std::abs(rng.normal()) * noise, thickness);
      const Point3 local = face.center + face.axis_a * a + face.axis_b * b - face.normal * depth;
      const Point3 world = center + rotate_y(local, box.ry);
      cloud.points.push_back({to_float_grid(world.x), to_float_grid(world.y), to_float_grid(world.z)});
      intensities.push_back(to_float_grid(std::clamp(intensity + 0.05 * rng.normal(), 0.0, 1.0)));
    }
  }
}

Box3D inflated(const Box3D & box, double margin)
{
  Box3D out = box;
  out.l += margin;
  out.w += margin;
  out.h += margin;
  return out;
}

bool overlaps_any(const Box3D & candidate, const std::vector<Box3D> & placed, double gap)
{
  const Box3D grown = inflated(candidate, gap);
  return std::any_of(placed.begin(), placed.end(), [&](const Box3D & other) {
    return geometry::bev_intersection_area(grown, inflated(other, gap)) > 0.0;
  });
}

Box3D place(
  const SceneSpec & spec, double h, double w, double l, Rng & rng,
  const std::vector<Box3D> & placed)
{
  for (int attempt = 0; attempt < spec.max_placement_retries; ++attempt) {
    Box3D box;
    box.h = h;
    box.w = w;
    box.l = l;
    box.ry = normalize_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    box.cx = rng.uniform(spec.x_min, spec.x_max);
    box.cz = rng.uniform(spec.z_min, spec.z_max);
    box.cy = spec.ground_y - 0.5 * h;
    if (!overlaps_any(box, placed, spec.min_gap)) {
      return box;
    }
  }
  throw Error(
    ErrorKind::kSpecInfeasible,
    "could not place object after " + std::to_string(spec.max_placement_retries) + " retries");
}

}  // namespace

SceneSpec SceneSpec::street()
{
  SceneSpec spec;
  spec.objects = {
    {Category::kCar, 2, 5, {{1.52, 1.63, 3.88, 0.6}, {1.75, 1.85, 4.70, 0.4}}, 0.04},
    {Category::kPedestrian, 0, 2, {{1.76, 0.66, 0.84, 1.0}}, 0.05},
    {Category::kCyclist, 0, 1, {{1.74, 0.60, 1.76, 1.0}}, 0.05},
  };
  return spec;
}

SyntheticScene synthetic_scene(const SceneSpec & spec, std::uint64_t seed)
{
  if (spec.x_max <= spec.x_min || spec.z_max <= spec.z_min || spec.surface_density < 0.0 ||
      spec.ground_density < 0.0) {
    throw Error(ErrorKind::kSpecInfeasible, "degenerate placement region or density");
  }
  Rng rng(seed);
  SyntheticScene scene;
  scene.cloud.frame = Frame::kCamera;
  std::vector<double> intensities;
  std::vector<Box3D> placed;

  for (const auto & cls : spec.objects) {
    if (cls.count_max < cls.count_min || cls.count_min < 0) {
      throw Error(ErrorKind::kSpecInfeasible, "invalid object count range");
    }
    if (cls.count_max > 0 && cls.sizes.empty()) {
      throw Error(ErrorKind::kSpecInfeasible, "object class without size modes");
    }
    const int count =
      cls.count_min + static_cast<int>(rng.index(static_cast<std::size_t>(cls.count_max - cls.count_min + 1)));
    double total_weight = 0.0;
    for (const auto & mode : cls.sizes) {
      total_weight += mode.weight;
    }
    for (int i = 0; i < count; ++i) {
      double pick = rng.uniform() * total_weight;
      const SizeMode * mode = &cls.sizes.back();
      for (const auto & m : cls.sizes) {
        if (pick < m.weight) {
          mode = &m;
          break;
        }
        pick -= m.weight;
      }
      const double h = mode->h * std::max(0.5, 1.0 + cls.size_jitter * rng.normal());
      const double w = mode->w * std::max(0.5, 1.0 + cls.size_jitter * rng.normal());
      const double l = mode->l * std::max(0.5, 1.0 + cls.size_jitter * rng.normal());
      const Box3D box = place(spec, h, w, l, rng, placed);
      placed.push_back(box);
      scene.objects.push_back({cls.category, box});
      sample_visible_surface(
        box, spec.surface_density, spec.surface_noise, rng.uniform(0.2, 0.8), rng, scene.cloud,
        intensities);
    }
  }

  for (int i = 0; i < spec.distractor_count; ++i) {
    const bool pole = rng.bernoulli(0.5);
    const double h = pole ? rng.uniform(2.0, 4.0) : rng.uniform(0.5, 1.2);
    const double w = pole ? rng.uniform(0.15, 0.3) : rng.uniform(0.8, 1.6);
    const double l = pole ? w : rng.uniform(0.8, 2.0);
    const Box3D box = place(spec, h, w, l, rng, placed);
    placed.push_back(box);
    sample_visible_surface(
      box, spec.surface_density, spec.surface_noise, rng.uniform(0.1, 0.5), rng, scene.cloud,
      intensities);
  }

  const double margin = 4.0;
  const double gx0 = spec.x_min - margin;
  const double gx1 = spec.x_max + margin;
  const double gz0 = std::max(0.5, spec.z_min - margin);
  const double gz1 = spec.z_max + margin;
  const auto ground_count = static_cast<std::size_t>(
    std::floor(spec.ground_density * (gx1 - gx0) * (gz1 - gz0) + rng.uniform()));
  for (std::size_t i = 0; i < ground_count; ++i) {
    const Point3 p{
      rng.uniform(gx0, gx1), spec.ground_y + spec.ground_noise * rng.normal(), rng.uniform(gz0, gz1)};
    const bool hidden = std::any_of(placed.begin(), placed.end(), [&](const Box3D & box) {
      return geometry::contains(inflated(box, 0.3), p);
    });
    if (hidden) {
      continue;
    }
    scene.cloud.points.push_back({to_float_grid(p.x), to_float_grid(p.y), to_float_grid(p.z)});
    intensities.push_back(to_float_grid(rng.uniform(0.05, 0.2)));
  }
  scene.cloud.intensity = std::move(intensities);
  return scene;
}

void to_json(nlohmann::json & j, const SceneSpec & spec)
{
  nlohmann::json objects = nlohmann::json::array();
  for (const auto & cls : spec.objects) {
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto & m : cls.sizes) {
      sizes.push_back({{"h", m.h}, {"w", m.w}, {"l", m.l}, {"weight", m.weight}});
    }
    objects.push_back(
      {{"category", cls.category},
       {"count_min", cls.count_min},
       {"count_max", cls.count_max},
       {"sizes", sizes},
       {"size_jitter", cls.size_jitter}});
  }
  j = {
    {"objects", objects},
    {"x_min", spec.x_min},
    {"x_max", spec.x_max},
    {"z_min", spec.z_min},
    {"z_max", spec.z_max},
    {"ground_y", spec.ground_y},
    {"surface_density", spec.surface_density},
    {"ground_density", spec.ground_density},
    {"surface_noise", spec.surface_noise},
    {"ground_noise", spec.ground_noise},
    {"distractor_count", spec.distractor_count},
    {"min_gap", spec.min_gap},
    {"max_placement_retries", spec.max_placement_retries}};
}

void from_json(const nlohmann::json & j, SceneSpec & spec)
{
  spec = SceneSpec{};
  if (j.contains("objects")) {
    for (const auto & o : j.at("objects")) {
      ObjectClassSpec cls;
      cls.category = o.at("category").get<Category>();
      cls.count_min = o.value("count_min", 0);
      cls.count_max = o.value("count_max", cls.count_min);
      cls.size_jitter = o.value("size_jitter", 0.04);
      for (const auto & m : o.at("sizes")) {
        cls.sizes.push_back(
          {m.at("h").get<double>(), m.at("w").get<double>(), m.at("l").get<double>(),
           m.value("weight", 1.0)});
      }
      spec.objects.push_back(std::move(cls));
    }
  }
  spec.x_min = j.value("x_min", spec.x_min);
  spec.x_max = j.value("x_max", spec.x_max);
  spec.z_min = j.value("z_min", spec.z_min);
  spec.z_max = j.value("z_max", spec.z_max);
  spec.ground_y = j.value("ground_y", spec.ground_y);
  spec.surface_density = j.value("surface_density", spec.surface_density);
  spec.ground_density = j.value("ground_density", spec.ground_density);
  spec.surface_noise = j.value("surface_noise", spec.surface_noise);
  spec.ground_noise = j.value("ground_noise", spec.ground_noise);
  spec.distractor_count = j.value("distractor_count", spec.distractor_count);
  spec.min_gap = j.value("min_gap", spec.min_gap);
  spec.max_placement_retries = j.value("max_placement_retries", spec.max_placement_retries);
}

}  // namespace cloudseed::pointcloud
