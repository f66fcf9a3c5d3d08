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
#include <numeric>

#include "cloudseed/error.hpp"
#include "cloudseed/eval.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/synthetic.hpp"
#include "ap_oracle.hpp"

namespace cloudseed::eval
{
namespace
{

using testing::car;
using testing::exhaustive_ap;
using testing::random_instance;

DetectionResult det(const std::string & scene, const Box3D & box, double score)
{
  DetectionResult d;
  d.scene_id = scene;
  d.box = box;
  d.score = score;
  return d;
}

TEST(AveragePrecision, PerfectAndEmpty)
{
  const GroundTruthIndex gts{{"a", {car(0, 10), car(6, 10)}}, {"b", {car(0, 20)}}};
  const std::vector<DetectionResult> perfect{det("a", car(0, 10), 0.9), det("a", car(6, 10), 0.5),
                                             det("b", car(0, 20), 0.7)};
  EXPECT_EQ(average_precision(perfect, gts, 0.5), 1.0);
  EXPECT_EQ(average_precision({}, gts, 0.5), 0.0);
}

TEST(AveragePrecision, HandCase)
{
  const GroundTruthIndex gts{{"a", {car(0, 10), car(6, 10), car(12, 10)}}};
  const std::vector<DetectionResult> dets{det("a", car(0, 10), 0.9), det("a", car(30, 30), 0.8),
                                          det("a", car(6, 10), 0.7)};
  // PR points (1/3, 1), (1/3, 1/2), (2/3, 2/3): levels 0..0.3 give 1, 0.4..0.6 give 2/3.
  EXPECT_NEAR(average_precision(dets, gts, 0.5), 6.0 / 11.0, 1e-12);
  EXPECT_NEAR(average_precision(dets, gts, 0.5), exhaustive_ap(dets, gts, 0.5), 1e-12);
}

TEST(AveragePrecision, MatchesExhaustiveOracle)
{
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto inst = random_instance(rng);
    for (double thr : {0.25, 0.5, 0.7}) {
      EXPECT_NEAR(average_precision(inst.dets, inst.gts, thr), exhaustive_ap(inst.dets, inst.gts, thr), 1e-12)
        << "trial " << trial;
    }
  }
}

TEST(AveragePrecision, DeletingFalsePositiveNeverHurts)
{
  Rng rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = random_instance(rng);
    const double before = average_precision(inst.dets, inst.gts, 0.5);
    // A detection that overlaps no gt at the threshold is a false positive in every ranking.
    for (std::size_t i = 0; i < inst.dets.size(); ++i) {
      bool overlaps = false;
      const auto it = inst.gts.find(inst.dets[i].scene_id);
      if (it != inst.gts.end()) {
        for (const auto & g : it->second) {
          overlaps = overlaps || geometry::box_iou_3d(inst.dets[i].box, g) >= 0.5;
        }
      }
      if (!overlaps) {
        auto fewer = inst.dets;
        fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
        EXPECT_GE(average_precision(fewer, inst.gts, 0.5), before - 1e-15);
        break;
      }
    }
  }
}

TEST(AveragePrecision, ThresholdRange)
{
  const GroundTruthIndex gts{{"a", {car(0, 10)}}};
  const std::vector<DetectionResult> dets{det("a", car(0, 10), 1.0)};
  for (double bad : {0.0, -0.1, 1.5, std::nan("")}) {
    try {
      average_precision(dets, gts, bad);
      ADD_FAILURE() << bad;
    } catch (const Error & e) {
      EXPECT_EQ(e.kind(), ErrorKind::kParameter);
    }
  }
  EXPECT_EQ(average_precision(dets, gts, 1.0), 1.0);
}

std::vector<EvalScene> synthetic_eval_scenes(int n)
{
  std::vector<EvalScene> scenes;
  for (int i = 0; i < n; ++i) {
    auto s = pointcloud::synthetic_scene(pointcloud::SceneSpec::street(), 100 + static_cast<std::uint64_t>(i));
    scenes.push_back({"scene" + std::to_string(i), std::move(s.cloud), std::move(s.objects)});
  }
  return scenes;
}

std::vector<DetectionResult> perfect_results(const std::vector<EvalScene> & scenes)
{
  std::vector<DetectionResult> out;
  for (const auto & s : scenes) {
    for (const auto & obj : s.objects) {
      DetectionResult d = det(s.scene_id, obj.box, 1.0);
      d.category = obj.category;
      d.mask.source_indices = geometry::points_in_box(s.cloud, obj.box);
      d.mask.foreground_confidence.assign(d.mask.source_indices.size(), 1.0);
      out.push_back(d);
    }
  }
  return out;
}

TEST(EvaluatePipeline, GroundTruthAsPredictionsIsPerfect)
{
  const auto scenes = synthetic_eval_scenes(6);
  const auto results = perfect_results(scenes);
  const auto metrics = evaluate_pipeline(results, scenes, default_iou_thresholds());
  ASSERT_TRUE(metrics.count(Category::kCar));
  for (const auto & [c, m] : metrics) {
    EXPECT_EQ(m.n_matched, m.n_instances);
    EXPECT_EQ(m.mean_iiou, 1.0);
    EXPECT_EQ(m.mean_centroid_error_m, 0.0);
    EXPECT_EQ(m.std_centroid_error_m, 0.0);
    EXPECT_EQ(m.mean_box_iou, 1.0);
    EXPECT_EQ(m.ap_3d, 1.0);
  }
  EXPECT_EQ(metrics.at(Category::kCar).iou_threshold, 0.5);
}

TEST(EvaluatePipeline, SceneOrderDoesNotMatter)
{
  auto scenes = synthetic_eval_scenes(5);
  auto results = perfect_results(scenes);
  Rng rng(3);
  for (auto & r : results) {
    r.box.cx += rng.uniform(-0.6, 0.6);
    r.box.ry += rng.uniform(-0.3, 0.3);
    r.score = rng.uniform();
    if (!r.mask.source_indices.empty() && rng.bernoulli(0.5)) {
      r.mask.source_indices.pop_back();
      r.mask.foreground_confidence.pop_back();
    }
  }
  const auto a = metrics_json(evaluate_pipeline(results, scenes, default_iou_thresholds()));
  std::reverse(scenes.begin(), scenes.end());
  std::stable_sort(results.begin(), results.end(), [](const auto & x, const auto & y) { return x.scene_id > y.scene_id; });
  const auto b = metrics_json(evaluate_pipeline(results, scenes, default_iou_thresholds()));
  EXPECT_EQ(a, b);
}

TEST(EvaluatePipeline, UnmatchedGroundTruthOnlyAffectsAp)
{
  const auto scenes = synthetic_eval_scenes(3);
  auto results = perfect_results(scenes);
  std::vector<DetectionResult> cars;
  for (const auto & r : results) {
    if (r.category == Category::kCar) {
      cars.push_back(r);
    }
  }
  ASSERT_GE(cars.size(), 3U);
  cars.pop_back();
  const auto m = evaluate_pipeline(cars, scenes, default_iou_thresholds()).at(Category::kCar);
  EXPECT_EQ(m.n_matched, m.n_instances - 1);
  EXPECT_EQ(m.mean_iiou, 1.0);
  EXPECT_EQ(m.mean_box_iou, 1.0);
  EXPECT_LT(m.ap_3d, 1.0);
}

TEST(EvaluatePipeline, ErrorColumnsKeepPoorBoxes)
{
  // A right mask with a badly placed box still counts in the error means.
  const auto scenes = synthetic_eval_scenes(1);
  auto results = perfect_results(scenes);
  ASSERT_FALSE(results.empty());
  results[0].box.cx += 50.0;
  const auto m = evaluate_pipeline(results, scenes, default_iou_thresholds()).at(results[0].category);
  EXPECT_EQ(m.n_matched, m.n_instances);
  EXPECT_LT(m.mean_box_iou, 1.0);
  EXPECT_GT(m.mean_centroid_error_m, 0.0);
}

TEST(EvaluatePipeline, UnknownSceneAndMissingThreshold)
{
  const auto scenes = synthetic_eval_scenes(1);
  EXPECT_THROW(evaluate_pipeline(std::vector<DetectionResult>{det("nope", car(0, 0), 1)}, scenes, default_iou_thresholds()), Error);
  EXPECT_THROW(evaluate_pipeline(perfect_results(scenes), scenes, {}), Error);
}

TEST(ResultsFile, JsonlRoundTrip)
{
  const auto scenes = synthetic_eval_scenes(2);
  auto results = perfect_results(scenes);
  results[0].score = 0.123456789012345678;
  results[0].mask.click = {"scene0", Category::kCar, {1.5, 0.25, 10.125}, 42};
  const auto text = results_jsonl(results);
  const auto back = parse_results_jsonl(text);
  ASSERT_EQ(back.size(), results.size());
  EXPECT_EQ(results_jsonl(back), text);
  EXPECT_EQ(back[0].score, results[0].score);
  EXPECT_EQ(back[0].mask.click, results[0].mask.click);
  try {
    parse_results_jsonl(text + "{\"scene_id\": 3}\n");
    FAIL();
  } catch (const Error & e) {
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(results.size() + 1)), std::string::npos);
  }
}

TEST(MetricsOutput, CsvAndJson)
{
  std::map<Category, ClassMetrics> m;
  m[Category::kCar] = {10, 12, 9, 0.85, 0.2, 0.1, 0.7, 0.5, 0.8833};
  const auto csv = metrics_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "category,n_instances,n_detections,n_matched,mean_iiou,mean_centroid_error_m,std_centroid_error_m,"
            "mean_box_iou,iou_threshold,ap_3d");
  EXPECT_NE(csv.find("car,10,12,9,0.84999999999999998,"), std::string::npos);
  const auto j = metrics_json(m);
  EXPECT_EQ(j.at("car").get<ClassMetrics>().ap_3d, 0.8833);
}

TEST(Timing, SingleSceneMatchesPaperRate)
{
  const std::vector<SceneTiming> t{{"a", 10, 37.0}};
  const auto r = timing_report(t);
  ASSERT_EQ(r.buckets.size(), 1U);
  EXPECT_DOUBLE_EQ(r.buckets[0].mean_seconds_per_object, 3.7);
  EXPECT_DOUBLE_EQ(r.overall_seconds_per_object, 3.7);
}

TEST(Timing, PaperTotals)
{
  // 15,996 objects over 58,832 s split across scenes of varying size.
  std::vector<SceneTiming> t;
  long long objects = 0;
  double seconds = 0.0;
  int i = 0;
  while (objects < 15'996) {
    const int n = static_cast<int>(std::min<long long>(1 + i % 9, 15'996 - objects));
    t.push_back({"s" + std::to_string(i), n, 0.0});
    objects += n;
    ++i;
  }
  for (auto & s : t) {
    s.elapsed_s = 58'832.0 * s.n_objects / 15'996.0;
    seconds += s.elapsed_s;
  }
  const auto r = timing_report(t);
  EXPECT_EQ(r.total_objects, 15'996);
  EXPECT_NEAR(r.overall_seconds_per_object, 3.678, 5e-4);
  EXPECT_NEAR(r.overall_seconds_per_object, seconds / 15'996.0, 1e-9);
}

TEST(Timing, BucketsAndExclusions)
{
  const std::vector<SceneTiming> t{{"a", 3, 12.0}, {"b", 3, 12.0}, {"c", 0, 5.0}, {"d", 1, 6.0}};
  const auto r = timing_report(t);
  ASSERT_EQ(r.buckets.size(), 2U);
  EXPECT_EQ(r.buckets[0].n_objects, 1);
  EXPECT_EQ(r.buckets[1].n_objects, 3);
  EXPECT_EQ(r.buckets[1].scenes, 2U);
  EXPECT_EQ(r.buckets[1].mean_seconds_per_object, 4.0);
  EXPECT_EQ(r.per_scene[0], r.per_scene[1]);
  EXPECT_EQ(r.excluded, (std::vector<std::string>{"c"}));
  EXPECT_NEAR(r.overall_seconds_per_object, 30.0 / 7.0, 1e-12);
  EXPECT_EQ(timing_csv(r), "n_objects,scenes,mean_seconds_per_object\n1,1,6\n3,2,4\nall,3,4.2857142857142856\n");
  const auto svg = timing_svg(r);
  EXPECT_EQ(svg.rfind("<svg", 0), 0U);
  std::size_t circles = 0;
  for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) {
    ++circles;
  }
  EXPECT_EQ(circles, r.per_scene.size());
}

TEST(Timing, EventTimesJson)
{
  const auto t = nlohmann::json{{"scene_id", "a"}, {"n_objects", 2}, {"display_ms", 1000}, {"submit_ms", 8400}}
                   .get<SceneTiming>();
  EXPECT_DOUBLE_EQ(t.elapsed_s, 7.4);
  EXPECT_THROW((nlohmann::json{{"scene_id", "a"}, {"n_objects", -1}, {"elapsed_s", 1.0}}.get<SceneTiming>()), Error);
}

}  // namespace
}  // namespace cloudseed::eval
