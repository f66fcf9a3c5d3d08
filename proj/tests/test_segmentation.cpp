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
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/nn/checkpoint.hpp"
#include "cloudseed/nn/optim.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/segmentation.hpp"
#include "oracles.hpp"

namespace cloudseed::segmentation
{
namespace
{

PointCloud camera_cloud(std::vector<Point3> points)
{
  PointCloud c;
  c.points = std::move(points);
  c.frame = Frame::kCamera;
  return c;
}

GroundTruthObject car_at(double x, double z, double ry = 0.0)
{
  return {Category::kCar, Box3D{x, 1.0, z, 1.5, 1.6, 3.9, ry}};
}

// Points filling `box` on a jittered grid, plus clutter on a ring away from it.
PointCloud box_with_clutter(const Box3D & box, std::size_t inside, std::size_t clutter, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<Point3> pts;
  const double c = std::cos(box.ry);
  const double s = std::sin(box.ry);
  for (std::size_t i = 0; i < inside; ++i) {
    const double u = rng.uniform(-0.49, 0.49) * box.l;
    const double v = rng.uniform(-0.49, 0.49) * box.h;
    const double w = rng.uniform(-0.49, 0.49) * box.w;
    pts.push_back({box.cx + c * u + s * w, box.cy + v, box.cz - s * u + c * w});
  }
  for (std::size_t i = 0; i < clutter; ++i) {
    const double a = rng.uniform(-M_PI, M_PI);
    const double r = rng.uniform(2.8, 3.9);
    pts.push_back({box.cx + r * std::cos(a), box.cy + rng.uniform(-0.5, 0.7), box.cz + r * std::sin(a)});
  }
  return camera_cloud(std::move(pts));
}

nn::ModelParams constant_model(double foreground_logit)
{
  nn::ArchDescriptor arch;
  arch.per_point_widths = {4};
  arch.global_widths = {4};
  auto p = nn::ModelParams::zeros(arch);
  p.values[p.layout.output.bias_offset + 1] = foreground_logit;
  return p;
}

TEST(SimulateClick, SinglePointBox)
{
  const auto gt = car_at(0.0, 10.0);
  const auto cloud = camera_cloud({{0.1, 1.2, 10.3}, {5.0, 1.0, 10.0}});
  const Click c = simulate_click(cloud, gt, 3, "s1");
  EXPECT_EQ(c.position, cloud.points[0]);
  EXPECT_EQ(c.scene_id, "s1");
  EXPECT_EQ(c.category, Category::kCar);
}

TEST(SimulateClick, AlwaysInsideAndCoversEveryPoint)
{
  const auto gt = car_at(2.0, 15.0, 0.7);
  const auto cloud = box_with_clutter(gt.box, 10, 30, 4);
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Click c = simulate_click(cloud, gt, seed);
    ASSERT_TRUE(testing::halfspace_contains(gt.box, c.position));
    const auto it = std::find(cloud.points.begin(), cloud.points.end(), c.position);
    seen.insert(static_cast<std::size_t>(it - cloud.points.begin()));
  }
  EXPECT_EQ(seen.size(), 10U);
}

TEST(SimulateClick, EmptyBoxIsTooSparse)
{
  try {
    simulate_click(camera_cloud({{50, 0, 50}}), car_at(0, 10), 1);
    FAIL();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInstanceTooSparse);
  }
}

TEST(MakeSegExample, IsolatedBoxIsAllForeground)
{
  const auto gt = car_at(0, 12);
  const auto cloud = box_with_clutter(gt.box, 200, 0, 1);
  const auto ex = make_seg_example(cloud, {gt}, 0, cloud.points[5], 20.0, 64, 2);
  EXPECT_EQ(ex.input_points.rows(), 64);
  EXPECT_TRUE(std::all_of(ex.labels.begin(), ex.labels.end(), [](int l) { return l == 1; }));
}

TEST(MakeSegExample, LabelsMatchHalfspaceOracle)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto gt = car_at(rng.uniform(-5, 5), rng.uniform(8, 30), rng.uniform(-3, 3));
    const auto cloud = box_with_clutter(gt.box, 150, 150, seed);
    const auto click = simulate_click(cloud, gt, seed);
    const auto ex = make_seg_example(cloud, {gt}, 0, click.position, 8.0, 256, seed);
    std::size_t fg = 0;
    for (Eigen::Index r = 0; r < ex.input_points.rows(); ++r) {
      const Point3 p{ex.input_points(r, 0) + click.position.x, ex.input_points(r, 1) + click.position.y,
                     ex.input_points(r, 2) + click.position.z};
      // Rebuilding the source point from the centered row is exact for these magnitudes only up
      // to rounding; compare against the nearest cloud point instead.
      const auto nearest = std::min_element(cloud.points.begin(), cloud.points.end(), [&](const Point3 & a, const Point3 & b) {
        return (a - p).norm() < (b - p).norm();
      });
      ASSERT_LT((*nearest - p).norm(), 1e-9);
      EXPECT_EQ(ex.labels[static_cast<std::size_t>(r)], testing::halfspace_contains(gt.box, *nearest) ? 1 : 0);
      fg += ex.labels[static_cast<std::size_t>(r)];
    }
    EXPECT_GT(fg, 0U);
    EXPECT_LT(fg, 256U);
  }
}

TEST(MakeSegExample, OtherInstancesAreBackground)
{
  const auto a = car_at(0, 12);
  const auto b = car_at(4.5, 12);
  auto cloud = box_with_clutter(a.box, 50, 0, 1);
  const auto cloud_b = box_with_clutter(b.box, 50, 0, 2);
  cloud.points.insert(cloud.points.end(), cloud_b.points.begin(), cloud_b.points.end());
  const auto ex = make_seg_example(cloud, {a, b}, 0, cloud.points[0], 20.0, 100, 3);
  EXPECT_EQ(std::count(ex.labels.begin(), ex.labels.end(), 1), 50);
}

TEST(MakeSegExample, AmbiguousClicks)
{
  const auto a = car_at(0, 12);
  const auto cloud = box_with_clutter(a.box, 50, 20, 1);
  const Point3 outside = cloud.points.back();
  for (const auto & call : {std::function<void()>([&] { make_seg_example(cloud, {a}, outside, 8.0, 32, 1); }),
                            std::function<void()>([&] { make_seg_example(cloud, {a}, 0, outside, 8.0, 32, 1); }),
                            std::function<void()>([&] { make_seg_example(cloud, {a, a}, cloud.points[0], 8.0, 32, 1); })}) {
    try {
      call();
      FAIL();
    } catch (const Error & e) {
      EXPECT_EQ(e.kind(), ErrorKind::kLabelAmbiguity);
    }
  }
  EXPECT_NO_THROW(make_seg_example(cloud, {a}, cloud.points[0], 8.0, 32, 1));
}

TEST(ClassifyInstances, SparseBoxesAreFlagged)
{
  const auto a = car_at(0, 12);
  const auto b = car_at(10, 12);
  auto cloud = box_with_clutter(a.box, 5, 0, 1);
  const auto few = box_with_clutter(b.box, 4, 0, 2);
  cloud.points.insert(cloud.points.end(), few.points.begin(), few.points.end());
  const auto report = classify_instances(cloud, {a, b});
  EXPECT_EQ(report.usable, std::vector<std::size_t>{0});
  EXPECT_EQ(report.too_sparse, std::vector<std::size_t>{1});
}

TEST(SegmentInstance, ConfidentForegroundModelTakesWholePatch)
{
  const auto gt = car_at(0, 12);
  const auto cloud = box_with_clutter(gt.box, 300, 300, 3);
  const Click click{"s", Category::kCar, cloud.points[0], 0};
  const auto mask = segment_instance(constant_model(10.0), cloud, click, 4.0, {64, 0.5, 1});
  IndexSet expected;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 d = cloud.points[i] - click.position;
    if (std::abs(d.x) <= 2.0 && std::abs(d.y) <= 2.0 && std::abs(d.z) <= 2.0) {
      expected.push_back(i);
    }
  }
  ASSERT_GT(expected.size(), 64U);
  EXPECT_EQ(mask.source_indices, expected);
  for (double c : mask.foreground_confidence) {
    EXPECT_NEAR(c, 1.0, 1e-4);
  }
}

TEST(SegmentInstance, ConfidentBackgroundModelIsBelowThreshold)
{
  const auto gt = car_at(0, 12);
  const auto cloud = box_with_clutter(gt.box, 30, 30, 3);
  try {
    segment_instance(constant_model(-10.0), cloud, Click{"s", Category::kCar, cloud.points[0], 0}, 8.0);
    FAIL();
  } catch (const BelowThresholdError & e) {
    EXPECT_NEAR(e.max_confidence(), 1.0 / (1.0 + std::exp(10.0)), 1e-12);
  }
}

TEST(SegmentInstance, EmptyVolumeIsEmptyInstance)
{
  const auto cloud = camera_cloud({{100, 0, 100}});
  try {
    segment_instance(constant_model(1.0), cloud, Click{"s", Category::kCar, {0, 0, 10}, 0}, 8.0);
    FAIL();
  } catch (const Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyInstance);
  }
}

TEST(SegmentInstance, DeterministicAndConfinedToVolume)
{
  const auto p = nn::ModelParams::initialize(nn::ArchDescriptor::segmentation(), 5);
  const auto gt = car_at(0, 12, 0.3);
  const auto cloud = box_with_clutter(gt.box, 400, 400, 5);
  const Click click{"s", Category::kCar, cloud.points[3], 0};
  SegmentOptions opts;
  opts.count = 128;
  opts.threshold = 0.0;  // keep every scored point
  const auto a = segment_instance(p, cloud, click, 3.0, opts);
  const auto b = segment_instance(p, cloud, click, 3.0, opts);
  EXPECT_EQ(a.source_indices, b.source_indices);
  EXPECT_EQ(a.foreground_confidence, b.foreground_confidence);
  for (std::size_t i : a.source_indices) {
    const Point3 d = cloud.points[i] - click.position;
    EXPECT_LE(std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)}), 1.5);
  }
}

TEST(SegmentInstance, ComponentRadiusKeepsTheClickedCluster)
{
  std::vector<Point3> pts;
  for (int i = 0; i < 10; ++i) {
    pts.push_back({0.2 * i, 0.0, 10.0});  // clicked cluster, 0.2 m spacing
  }
  for (int i = 0; i < 10; ++i) {
    pts.push_back({2.8 + 0.2 * i, 0.0, 10.0});  // 1 m gap to the first cluster
  }
  const auto cloud = camera_cloud(pts);
  const Click click{"s", Category::kCar, pts[4], 0};
  SegmentOptions opts{64, 0.5, 1, 0.0};
  EXPECT_EQ(segment_instance(constant_model(10.0), cloud, click, 8.0, opts).source_indices.size(), 20U);
  opts.component_radius = 0.3;
  const auto mask = segment_instance(constant_model(10.0), cloud, click, 8.0, opts);
  IndexSet first(10);
  std::iota(first.begin(), first.end(), std::size_t{0});
  EXPECT_EQ(mask.source_indices, first);
  EXPECT_EQ(mask.foreground_confidence.size(), 10U);
  opts.component_radius = 1.01;
  EXPECT_EQ(segment_instance(constant_model(10.0), cloud, click, 8.0, opts).source_indices.size(), 20U);
  opts.component_radius = -1.0;
  EXPECT_THROW(segment_instance(constant_model(10.0), cloud, click, 8.0, opts), Error);
}

// Union-find over all pairs as an independent oracle for the kept component.
TEST(SegmentInstance, ComponentMatchesUnionFindOracle)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<Point3> pts;
    for (int i = 0; i < 120; ++i) {
      pts.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), 10.0 + rng.uniform(-2, 2)});
    }
    const auto cloud = camera_cloud(pts);
    const Click click{"s", Category::kCar, {0.05, 0.0, 10.0}, 0};
    const double radius = rng.uniform(0.3, 0.9);
    const auto mask = segment_instance(constant_model(10.0), cloud, click, 8.0, {64, 0.5, seed, radius});

    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const std::function<std::size_t(std::size_t)> root = [&](std::size_t i) {
      return parent[i] == i ? i : parent[i] = root(parent[i]);
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const Point3 d = pts[i] - pts[j];
        if (d.x * d.x + d.y * d.y + d.z * d.z <= radius * radius) {
          parent[root(i)] = root(j);
        }
      }
    }
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Point3 d = pts[i] - click.position;
      const double d2 = d.x * d.x + d.y * d.y + d.z * d.z;
      if (d2 < best) {
        best = d2;
        nearest = i;
      }
    }
    IndexSet expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (root(i) == root(nearest)) {
        expected.push_back(i);
      }
    }
    EXPECT_EQ(mask.source_indices, expected) << "seed " << seed;
  }
}

TEST(TrainSegmentation, OverfitsSeparableExample)
{
  const auto gt = car_at(0, 12);
  const auto cloud = box_with_clutter(gt.box, 64, 64, 6);
  const auto ex = make_seg_example(cloud, {gt}, 0, cloud.points[0], 10.0, 128, 1);
  SegTrainOptions opts;
  opts.arch.per_point_widths = {16, 32};
  opts.arch.global_widths = {32, 16};
  opts.augment_yaw = false;
  opts.train.max_iters = 200;
  opts.train.batch_size = 1;
  opts.train.rng_seed = 11;
  opts.train.validate_every = 50;
  const auto result = train_segmentation({ex}, {ex}, opts);
  EXPECT_LT(result.history.steps.back().loss, 0.1);
  EXPECT_LT(validation_loss(result.params, {ex}), 0.1);
  for (const auto & s : result.history.steps) {
    ASSERT_EQ(s.lr, nn::lr_at(opts.train, s.iteration));
  }
  const auto again = train_segmentation({ex}, {ex}, opts);
  EXPECT_EQ(nn::encode_checkpoint(result.params, {}), nn::encode_checkpoint(again.params, {}));
}

TEST(TrainSegmentation, RejectsEmptySets)
{
  SegTrainOptions opts;
  const std::vector<SegExample> none;
  EXPECT_THROW(train_segmentation(none, none, opts), Error);
}

TEST(Manifest, RoundTripAndLineNumbers)
{
  const ManifestRecord a{"000001", 2, Category::kPedestrian, {1.5, -0.25, 17.0}, 99, "train"};
  const ManifestRecord b{"000002", 0, Category::kCar, {0.0, 1.0, 9.0}, 7, "val"};
  const auto text = manifest_line(a) + "\n" + manifest_line(b) + "\n";
  EXPECT_EQ(parse_manifest(text), (std::vector<ManifestRecord>{a, b}));
  try {
    parse_manifest(manifest_line(a) + "\n{broken\n");
    FAIL();
  } catch (const Error & e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ClickJson, RoundTrip)
{
  const Click c{"000123", Category::kCyclist, {1.25, 0.5, 30.0}, 4100};
  EXPECT_EQ(nlohmann::json(c).get<Click>(), c);
}

}  // namespace
}  // namespace cloudseed::segmentation
