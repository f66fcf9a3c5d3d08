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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/kitti.hpp"
#include "cloudseed/patch.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/scene_io.hpp"
#include "cloudseed/synthetic.hpp"
#include "oracles.hpp"

namespace cloudseed::pointcloud
{
namespace
{

// Independent little-endian float32 writer.
void append_f32_le(std::vector<std::uint8_t> & out, float v)
{
  std::uint32_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 4; ++b) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xffU));
  }
}

std::vector<std::uint8_t> velodyne_bytes(const std::vector<std::array<float, 4>> & records)
{
  std::vector<std::uint8_t> out;
  for (const auto & r : records) {
    for (float v : r) {
      append_f32_le(out, v);
    }
  }
  return out;
}

ErrorKind kind_of(const std::function<void()> & f)
{
  try {
    f();
  } catch (const Error & e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(Velodyne, SinglePoint)
{
  const auto cloud = parse_velodyne_bin(velodyne_bytes({{1.0F, 2.0F, 3.0F, 0.5F}}));
  ASSERT_EQ(cloud.size(), 1U);
  EXPECT_EQ(cloud.points[0], (Point3{1, 2, 3}));
  ASSERT_TRUE(cloud.intensity.has_value());
  EXPECT_EQ((*cloud.intensity)[0], 0.5);
  EXPECT_EQ(cloud.frame, Frame::kLidar);
}

TEST(Velodyne, EmptyInput)
{
  EXPECT_TRUE(parse_velodyne_bin({}).empty());
}

TEST(Velodyne, ByteRoundTrip)
{
  const auto bytes = velodyne_bytes({{1.25F, -7.5F, 0.125F, 0.0F}, {40.1F, 3.3F, -1.7F, 0.99F}});
  const auto cloud = parse_velodyne_bin(bytes);
  ASSERT_EQ(cloud.size(), 2U);
  EXPECT_EQ(encode_velodyne_bin(cloud), bytes);
}

TEST(Velodyne, MalformedInputs)
{
  EXPECT_EQ(kind_of([] { parse_velodyne_bin(std::vector<std::uint8_t>(17, 0)); }), ErrorKind::kMalformedFile);
  EXPECT_EQ(kind_of([] { parse_velodyne_bin(velodyne_bytes({{NAN, 0.0F, 0.0F, 0.0F}})); }),
            ErrorKind::kMalformedFile);
}

TEST(KittiLabels, FieldMapping)
{
  const auto objects = parse_kitti_labels("Car 0 0 0 0 0 0 0 1.5 1.6 3.9 1.0 1.5 20.0 0.0\n");
  ASSERT_EQ(objects.size(), 1U);
  EXPECT_EQ(objects[0].category, Category::kCar);
  const Box3D & b = objects[0].box;
  EXPECT_EQ(b.cx, 1.0);
  // Label locations are bottom-face centers; y points down, so the centroid sits h/2 higher.
  EXPECT_EQ(b.cy, 1.5 - 0.75);
  EXPECT_EQ(b.cz, 20.0);
  EXPECT_EQ(b.h, 1.5);
  EXPECT_EQ(b.w, 1.6);
  EXPECT_EQ(b.l, 3.9);
  EXPECT_EQ(b.ry, 0.0);
}

TEST(KittiLabels, SkipsOtherTypesAndKeepsOrder)
{
  EXPECT_TRUE(parse_kitti_labels("DontCare -1 -1 -10 503 169 590 190 -1 -1 -1 -1000 -1000 -1000 -10\n").empty());
  const std::string text =
    "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 1 1.5 10 0\n"
    "Van 0 0 0 0 0 0 0 2.0 1.8 4.5 0 1.5 30 0\n"
    "Pedestrian 0 0 0 0 0 0 0 1.7 0.6 0.8 2 1.5 11 0.3\n"
    "\n"
    "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 3 1.5 12 0\n"
    "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 4 1.5 13 0\n";
  const auto objects = parse_kitti_labels(text);
  ASSERT_EQ(objects.size(), 4U);
  EXPECT_EQ(objects[0].category, Category::kCar);
  EXPECT_EQ(objects[1].category, Category::kPedestrian);
  EXPECT_EQ(objects[2].box.cx, 3.0);
  EXPECT_EQ(objects[3].box.cx, 4.0);
}

TEST(KittiLabels, ParseErrorNamesLine)
{
  try {
    parse_kitti_labels("Car 0 0 0 0 0 0 0 1.5 1.6 3.9 1 1.5 10 0\nCar 0 0 0 0 0 0 0 1.5 abc 3.9 1 1.5 10 0\n");
    FAIL();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_EQ(kind_of([] { parse_kitti_labels("Car 0 0 0\n"); }), ErrorKind::kParse);
}

constexpr const char * kIdentityCalib =
  "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n"
  "R0_rect: 1 0 0 0 1 0 0 0 1\n"
  "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n";

TEST(KittiCalib, IdentityFixture)
{
  const auto c = parse_kitti_calib(kIdentityCalib);
  EXPECT_EQ(c.r0_rect, (std::array<double, 9>{1, 0, 0, 0, 1, 0, 0, 0, 1}));
  EXPECT_EQ(c.tr_velo_to_cam, (std::array<double, 12>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0}));
  ASSERT_TRUE(c.p2.has_value());
}

TEST(KittiCalib, KeyOrderDoesNotMatter)
{
  const std::string permuted =
    "Tr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "P2: 1 0 0 0 0 1 0 0 0 0 1 0\n"
    "R0_rect: 1 0 0 0 1 0 0 0 1\n";
  EXPECT_EQ(parse_kitti_calib(permuted), parse_kitti_calib(kIdentityCalib));
}

TEST(KittiCalib, ArityAndMissingKeys)
{
  EXPECT_THROW(parse_kitti_calib("R0_rect: 1 0 0 0 1 0 0 0\nTr_velo_to_cam: 1 0 0 0 0 1 0 0 0 0 1 0\n"), Error);
  EXPECT_EQ(kind_of([] { parse_kitti_calib("R0_rect: 1 0 0 0 1 0 0 0 1\n"); }),
            ErrorKind::kCalibrationIncomplete);
}

TEST(CameraFrame, IdentityAndTranslation)
{
  PointCloud cloud{{{1, 2, 3}}, std::vector<double>{0.25}, Frame::kLidar};
  const auto same = to_camera_frame(cloud, Calibration::identity());
  EXPECT_EQ(same.points[0], (Point3{1, 2, 3}));
  EXPECT_EQ(same.frame, Frame::kCamera);
  EXPECT_EQ(same.intensity, cloud.intensity);

  Calibration shift = Calibration::identity();
  shift.tr_velo_to_cam[11] = 5.0;
  const auto moved = to_camera_frame(PointCloud{{{0, 0, 0}}, std::nullopt, Frame::kLidar}, shift);
  EXPECT_EQ(moved.points[0], (Point3{0, 0, 5}));
  EXPECT_EQ(kind_of([&] { to_camera_frame(same, shift); }), ErrorKind::kFrameMismatch);
}

std::array<double, 9> random_rotation(Rng & rng)
{
  // Normalized random quaternion.
  double q[4];
  double n = 0;
  for (double & v : q) {
    v = rng.normal();
    n += v * v;
  }
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

TEST(CameraFrame, RigidTransformsPreserveDistances)
{
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Calibration c;
    const auto r = random_rotation(rng);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        c.tr_velo_to_cam[static_cast<std::size_t>(4 * i + j)] = r[static_cast<std::size_t>(3 * i + j)];
      }
      c.tr_velo_to_cam[static_cast<std::size_t>(4 * i + 3)] = rng.uniform(-3, 3);
    }
    c.r0_rect = random_rotation(rng);
    PointCloud cloud;
    for (int i = 0; i < 50; ++i) {
      cloud.points.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-3, 3)});
    }
    const auto out = to_camera_frame(cloud, c);
    for (std::size_t i = 0; i + 1 < cloud.size(); ++i) {
      const double before = (cloud.points[i] - cloud.points[i + 1]).norm();
      const double after = (out.points[i] - out.points[i + 1]).norm();
      EXPECT_LE(std::abs(after - before), 1e-9 * before);
    }
  }
}

PointCloud camera_cloud(std::vector<Point3> pts)
{
  return {std::move(pts), std::nullopt, Frame::kCamera};
}

TEST(CropVolume, Examples)
{
  const auto p = crop_volume(camera_cloud({{0, 0, 0}, {10, 0, 0}}), {0, 0, 0}, 2.0);
  EXPECT_EQ(p.points, (std::vector<Point3>{{0, 0, 0}}));
  EXPECT_EQ(p.source_indices, (IndexSet{0}));

  const auto lone = crop_volume(camera_cloud({{3.7, -1.2, 18.4}, {30, 0, 0}}), {3.7, -1.2, 18.4}, 4.0);
  EXPECT_EQ(lone.points, (std::vector<Point3>{{0, 0, 0}}));
  EXPECT_EQ(lone.source_indices, (IndexSet{0}));
}

TEST(CropVolume, BoundaryIsInclusive)
{
  const auto p = crop_volume(camera_cloud({{1, 1, -1}, {1.0000001, 0, 0}}), {0, 0, 0}, 2.0);
  EXPECT_EQ(p.source_indices, (IndexSet{0}));
}

TEST(CropVolume, MatchesBruteForceAndRestoresCoordinates)
{
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    // Stored clouds carry float32 coordinates; their differences are exact in double.
    auto f32 = [&](double lo, double hi) { return static_cast<double>(static_cast<float>(rng.uniform(lo, hi))); };
    std::vector<Point3> pts(5000);
    for (auto & q : pts) {
      q = {f32(-5, 5), f32(-5, 5), f32(-5, 5)};
    }
    const Point3 click{f32(-2, 2), f32(-2, 2), f32(-2, 2)};
    const double k = trial == 0 ? 10.0 : rng.uniform(1, 8);
    IndexSet expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::abs(pts[i].x - click.x) <= k / 2 && std::abs(pts[i].y - click.y) <= k / 2 &&
          std::abs(pts[i].z - click.z) <= k / 2) {
        expected.push_back(i);
      }
    }
    const auto patch = crop_volume(camera_cloud(pts), click, k);
    EXPECT_EQ(patch.source_indices, expected);
    for (std::size_t j = 0; j < patch.points.size(); ++j) {
      const Point3 & q = patch.points[j];
      EXPECT_LE(std::max({std::abs(q.x), std::abs(q.y), std::abs(q.z)}), k / 2);
      const Point3 restored = q + click;
      EXPECT_EQ(restored, pts[patch.source_indices[j]]);
    }
  }
}

TEST(CropVolume, Errors)
{
  EXPECT_EQ(kind_of([] { crop_volume(camera_cloud({{10, 0, 0}}), {0, 0, 0}, 2.0); }), ErrorKind::kEmptyPatch);
  EXPECT_EQ(kind_of([] { crop_volume(camera_cloud({{0, 0, 0}}), {0, 0, 0}, 0.0); }), ErrorKind::kParameter);
  EXPECT_EQ(kind_of([] { crop_volume(PointCloud{{{0, 0, 0}}, std::nullopt, Frame::kLidar}, {0, 0, 0}, 1.0); }),
            ErrorKind::kFrameMismatch);
}

TEST(CropVolume, DefaultSizes)
{
  const auto k = default_volume_sizes();
  EXPECT_EQ(k.at(Category::kCar), 8.0);
  EXPECT_EQ(k.at(Category::kPedestrian), 4.0);
  EXPECT_EQ(k.at(Category::kCyclist), 5.0);
}

TEST(Synthetic, ClutterOnly)
{
  SceneSpec spec = SceneSpec::street();
  spec.objects.clear();
  const auto scene = synthetic_scene(spec, 1);
  EXPECT_TRUE(scene.objects.empty());
  EXPECT_FALSE(scene.cloud.empty());
  EXPECT_EQ(scene.cloud.frame, Frame::kCamera);
}

TEST(Synthetic, DeterministicPerSeed)
{
  const auto spec = SceneSpec::street();
  const auto a = synthetic_scene(spec, 42);
  const auto b = synthetic_scene(spec, 42);
  EXPECT_EQ(encode_cspc(a.cloud), encode_cspc(b.cloud));
  EXPECT_EQ(a.objects, b.objects);
  const auto c = synthetic_scene(spec, 43);
  EXPECT_NE(encode_cspc(a.cloud), encode_cspc(c.cloud));
}

TEST(Synthetic, CarPointsLieInsideInflatedBox)
{
  SceneSpec spec = SceneSpec::street();
  spec.objects = {ObjectClassSpec{Category::kCar, 1, 1, {SizeMode{}}, 0.04}};
  spec.ground_density = 0.0;
  spec.distractor_count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = synthetic_scene(spec, seed);
    ASSERT_EQ(scene.objects.size(), 1U);
    ASSERT_GT(scene.cloud.size(), 20U);
    Box3D inflated = scene.objects[0].box;
    inflated.h += 0.02;
    inflated.w += 0.02;
    inflated.l += 0.02;
    std::size_t inside = 0;
    for (const auto & p : scene.cloud.points) {
      inside += testing::halfspace_contains(inflated, p);
    }
    EXPECT_GE(static_cast<double>(inside), 0.95 * static_cast<double>(scene.cloud.size())) << "seed " << seed;
  }
}

TEST(Synthetic, StreetScenesAreAnnotatable)
{
  const auto scene = synthetic_scene(SceneSpec::street(), 3);
  ASSERT_FALSE(scene.objects.empty());
  for (const auto & obj : scene.objects) {
    EXPECT_TRUE(obj.box.valid());
    EXPECT_FALSE(geometry::points_in_box(scene.cloud, obj.box).empty());
  }
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
      EXPECT_EQ(geometry::box_iou_3d(scene.objects[i].box, scene.objects[j].box), 0.0);
    }
  }
}

TEST(Synthetic, InfeasibleSpec)
{
  SceneSpec spec = SceneSpec::street();
  spec.x_min = -1;
  spec.x_max = 1;
  spec.z_min = 5;
  spec.z_max = 7;
  spec.objects = {ObjectClassSpec{Category::kCar, 10, 10, {SizeMode{}}, 0.0}};
  EXPECT_EQ(kind_of([&] { synthetic_scene(spec, 0); }), ErrorKind::kSpecInfeasible);
}

TEST(Synthetic, SpecJsonRoundTrip)
{
  const auto spec = SceneSpec::street();
  const auto back = nlohmann::json(spec).get<SceneSpec>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(spec));
}

TEST(Cspc, RoundTripAndHeader)
{
  PointCloud cloud{{{1.5, -2.25, 30.125}, {0, 0, 0}}, std::vector<double>{0.5, 1.0}, Frame::kCamera};
  const auto bytes = encode_cspc(cloud);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CSPC");
  EXPECT_EQ(bytes[4], kCspcVersion);
  EXPECT_EQ(decode_cspc(bytes), cloud);
  cloud.intensity.reset();
  EXPECT_EQ(decode_cspc(encode_cspc(cloud)), cloud);
}

TEST(Cspc, CorruptInputs)
{
  const auto good = encode_cspc(PointCloud{{{1, 2, 3}}, std::nullopt, Frame::kCamera});
  auto bad_magic = good;
  bad_magic[0] = 'X';
  auto bad_version = good;
  bad_version[4] = 99;
  auto truncated = good;
  truncated.pop_back();
  for (const auto & b : {bad_magic, bad_version, truncated}) {
    EXPECT_EQ(kind_of([&] { decode_cspc(b); }), ErrorKind::kMalformedFile);
  }
}

TEST(SceneStore, SaveLoadList)
{
  const auto dir = std::filesystem::temp_directory_path() / ("cloudseed_scene_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto synth = synthetic_scene(SceneSpec::street(), 5);
  const Scene scene{"scene_0005", synth.cloud, synth.objects};
  save_scene(dir, scene);
  save_scene(dir, Scene{"scene_0001", synth.cloud, {}});
  EXPECT_EQ(list_scenes(dir), (std::vector<std::string>{"scene_0001", "scene_0005"}));
  const auto back = load_scene(dir, "scene_0005");
  EXPECT_EQ(back.cloud.frame, scene.cloud.frame);
  EXPECT_EQ(back.cloud.points, scene.cloud.points);
  EXPECT_EQ(back.cloud.intensity, scene.cloud.intensity);
  ASSERT_EQ(back.objects.size(), scene.objects.size());
  for (std::size_t i = 0; i < back.objects.size(); ++i) {
    EXPECT_EQ(back.objects[i], scene.objects[i]);
  }
  EXPECT_EQ(kind_of([&] { load_scene(dir, "missing"); }), ErrorKind::kIo);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace cloudseed::pointcloud
