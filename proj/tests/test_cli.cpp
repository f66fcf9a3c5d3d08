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

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "cloudseed/eval.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/scene_io.hpp"
#include "cloudseed/segmentation.hpp"

namespace fs = std::filesystem;
using namespace cloudseed;

namespace
{

struct CliRun
{
  int status{-1};
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test
{
protected:
  void SetUp() override
  {
    dir_ = fs::temp_directory_path() /
           ("cloudseed_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string & args)
  {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = "env -u CLOUDSEED_CONFIG " + std::string(CLOUDSEED_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    CliRun r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = io::read_text(out);
    r.err = io::read_text(err);
    return r;
  }

  static std::map<std::string, std::string> tree(const fs::path & root)
  {
    std::map<std::string, std::string> files;
    for (const auto & e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) {
        files[fs::relative(e.path(), root).string()] = io::read_text(e.path());
      }
    }
    return files;
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpListsEveryCommandAndFlag)
{
  const auto r = run("--help");
  EXPECT_EQ(r.status, 0);
  for (const char * c : {"ingest", "synth", "simulate-clicks", "train-seg", "train-box", "infer", "evaluate", "timing-report", "serve"}) {
    EXPECT_NE(r.out.find(c), std::string::npos) << c;
  }
  for (const char * f : {"--config", "--seed", "--category"}) {
    EXPECT_NE(r.out.find(f), std::string::npos) << f;
  }
  const auto infer = run("infer --help");
  EXPECT_EQ(infer.status, 0);
  for (const char * f : {"--scenes", "--clicks", "--seg-models", "--box-models", "--out"}) {
    EXPECT_NE(infer.out.find(f), std::string::npos) << f;
  }
}

TEST_F(CliTest, UnknownFlagOrMissingInputFailsWithMessage)
{
  const auto unknown = run("synth --scenes 1 --bogus 3");
  EXPECT_NE(unknown.status, 0);
  EXPECT_NE(unknown.err.find("bogus"), std::string::npos);

  const auto missing = run("evaluate --scenes " + (dir_ / "absent").string() + " --results " + (dir_ / "r.jsonl").string() + " --out " + dir_.string());
  EXPECT_NE(missing.status, 0);
  EXPECT_FALSE(missing.err.empty());

  const auto no_out = run("simulate-clicks --scenes " + dir_.string());
  EXPECT_NE(no_out.status, 0);
  EXPECT_NE(no_out.err.find("--out"), std::string::npos);

  const auto bad_category = run("--category truck synth --scenes 1 --out " + dir_.string());
  EXPECT_NE(bad_category.status, 0);
  EXPECT_NE(bad_category.err.find("truck"), std::string::npos);
}

TEST_F(CliTest, SynthIsByteIdenticalAcrossRuns)
{
  ASSERT_EQ(run("synth --scenes 4 --seed 7 --out " + (dir_ / "a").string()).status, 0);
  ASSERT_EQ(run("synth --scenes 4 --seed 7 --out " + (dir_ / "b").string()).status, 0);
  ASSERT_EQ(run("synth --scenes 4 --seed 8 --out " + (dir_ / "c").string()).status, 0);
  const auto a = tree(dir_ / "a");
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(a, tree(dir_ / "b"));
  EXPECT_NE(a, tree(dir_ / "c"));
}

TEST_F(CliTest, SynthPrefixesGiveDisjointScenes)
{
  ASSERT_EQ(run("synth --scenes 2 --seed 7 --prefix train --out " + (dir_ / "a").string()).status, 0);
  ASSERT_EQ(run("synth --scenes 2 --seed 7 --prefix test --out " + (dir_ / "a").string()).status, 0);
  const auto ids = pointcloud::list_scenes(dir_ / "a");
  ASSERT_EQ(ids, (std::vector<std::string>{"test_0000", "test_0001", "train_0000", "train_0001"}));
  EXPECT_NE(
    pointcloud::load_scene(dir_ / "a", "test_0000").cloud, pointcloud::load_scene(dir_ / "a", "train_0000").cloud);
}

TEST_F(CliTest, EvaluateOnGroundTruthIsPerfect)
{
  ASSERT_EQ(run("synth --scenes 3 --seed 3 --out " + (dir_ / "scenes").string()).status, 0);
  std::vector<eval::DetectionResult> results;
  for (const auto & id : pointcloud::list_scenes(dir_ / "scenes")) {
    const auto scene = pointcloud::load_scene(dir_ / "scenes", id);
    for (const auto i : segmentation::classify_instances(scene.cloud, scene.objects).usable) {
      const auto & o = scene.objects[i];
      eval::DetectionResult d{id, o.category, o.box, 1.0, {}};
      d.mask.source_indices = geometry::points_in_box(scene.cloud, o.box);
      d.mask.foreground_confidence.assign(d.mask.source_indices.size(), 1.0);
      d.mask.click = {id, o.category, o.box.center(), 0};
      results.push_back(d);
    }
  }
  ASSERT_FALSE(results.empty());
  io::write_text(dir_ / "results.jsonl", eval::results_jsonl(results));
  const auto r = run(
    "evaluate --scenes " + (dir_ / "scenes").string() + " --results " + (dir_ / "results.jsonl").string() + " --out " +
    (dir_ / "metrics").string());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto metrics = nlohmann::json::parse(io::read_text(dir_ / "metrics" / "metrics.json"));
  ASSERT_TRUE(metrics.contains("car"));
  for (const auto & [category, m] : metrics.items()) {
    EXPECT_EQ(m.at("n_matched"), m.at("n_instances")) << category;
    EXPECT_EQ(m.at("mean_iiou"), 1.0) << category;
    EXPECT_EQ(m.at("mean_centroid_error_m"), 0.0) << category;
    EXPECT_EQ(m.at("mean_box_iou"), 1.0) << category;
    EXPECT_EQ(m.at("ap_3d"), 1.0) << category;
  }
  EXPECT_EQ(io::read_text(dir_ / "metrics" / "metrics.csv"), r.out);
}

TEST_F(CliTest, TimingReportWritesCsvAndFigure)
{
  io::write_text(
    dir_ / "timing.jsonl",
    "{\"scene_id\":\"a\",\"n_objects\":10,\"elapsed_s\":37.0}\n"
    "{\"scene_id\":\"b\",\"n_objects\":0,\"elapsed_s\":5.0}\n"
    "{\"scene_id\":\"c\",\"n_objects\":2,\"display_ms\":1000,\"submit_ms\":9000}\n");
  const auto r = run("timing-report --timings " + (dir_ / "timing.jsonl").string() + " --out " + (dir_ / "out").string());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(io::read_text(dir_ / "out" / "timing.csv"), "n_objects,scenes,mean_seconds_per_object\n2,1,4\n10,1,3.7000000000000002\nall,2,3.75\n");
  EXPECT_NE(io::read_text(dir_ / "out" / "timing.svg").find("<svg"), std::string::npos);
  EXPECT_NE(r.err.find("b"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndFlagsCombine)
{
  io::write_text(dir_ / "job.json", R"({"seed": 7, "paths": {"scenes": "from_config"}})");
  ASSERT_EQ(run("--config " + (dir_ / "job.json").string() + " synth --scenes 1").status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "from_config" / "scene_0000.cspc"));
  ASSERT_EQ(run("--config " + (dir_ / "job.json").string() + " --seed 8 synth --scenes 1 --out " + (dir_ / "flag").string()).status, 0);
  EXPECT_NE(tree(dir_ / "from_config"), tree(dir_ / "flag"));
  const auto env = "CLOUDSEED_CONFIG=" + (dir_ / "job.json").string() + " " + std::string(CLOUDSEED_CLI) + " synth --scenes 1 --out " + (dir_ / "env").string();
  ASSERT_EQ(std::system(env.c_str()), 0);
  EXPECT_EQ(tree(dir_ / "from_config"), tree(dir_ / "env"));
  io::write_text(dir_ / "bad.json", R"({"sed": 7})");
  const auto bad = run("--config " + (dir_ / "bad.json").string() + " synth --scenes 1 --out " + dir_.string());
  EXPECT_NE(bad.status, 0);
  EXPECT_NE(bad.err.find("sed"), std::string::npos);
}

TEST_F(CliTest, TinyPipelineRunsAndRepeatsByteForByte)
{
  io::write_text(
    dir_ / "tiny.json",
    R"({"seg_iterations": {"car": 4, "pedestrian": 2, "cyclist": 2},
        "seg": {"train": {"validate_every": 2, "batch_size": 4}},
        "box": {"train": {"max_iters": 4, "validate_every": 2, "batch_size": 4}},
        "val_fraction": 0.5})");
  const std::string cfg = "--config " + (dir_ / "tiny.json").string() + " --seed 7 ";
  const auto pipeline = [&](const fs::path & out) {
    const auto s = (dir_ / "scenes").string();
    const auto o = out.string();
    std::vector<std::string> steps = {
      "simulate-clicks --scenes " + s + " --out " + o + "/train.jsonl",
      "train-seg --scenes " + s + " --manifest " + o + "/train.jsonl --out " + o + "/models",
      "train-box --scenes " + s + " --manifest " + o + "/train.jsonl --out " + o + "/models",
      "simulate-clicks --scenes " + s + " --split test --out " + o + "/test.jsonl",
      "infer --scenes " + s + " --clicks " + o + "/test.jsonl --seg-models " + o + "/models --box-models " + o + "/models --out " + o + "/results.jsonl",
      "evaluate --scenes " + s + " --results " + o + "/results.jsonl --out " + o + "/metrics"};
    for (const auto & step : steps) {
      const auto r = run(cfg + step);
      ASSERT_EQ(r.status, 0) << step << "\n" << r.err;
    }
  };
  ASSERT_EQ(run(cfg + "synth --scenes 16 --out " + (dir_ / "scenes").string()).status, 0);
  pipeline(dir_ / "run1");
  pipeline(dir_ / "run2");
  const auto a = tree(dir_ / "run1");
  for (const char * f : {"models/seg_car.csnn", "models/seg_pedestrian.csnn", "models/seg_cyclist.csnn", "models/tnet.csnn",
                         "models/boxnet.csnn", "models/templates.json", "results.jsonl", "metrics/metrics.json"}) {
    EXPECT_TRUE(a.contains(f)) << f;
  }
  EXPECT_EQ(a, tree(dir_ / "run2"));
}

}  // namespace
