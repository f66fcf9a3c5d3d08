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

#ifndef CLOUDSEED__SERVICE_HPP_
#define CLOUDSEED__SERVICE_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/types.hpp"
#include "cloudseed/workflow.hpp"

namespace cloudseed::server
{

struct ServiceConfig
{
  std::filesystem::path scene_dir;
  std::vector<std::string> training_pool;
  std::vector<std::string> golden_pool;
  std::vector<std::string> annotation_pool;
  std::filesystem::path click_db;
  std::filesystem::path timing_log;
  Category category{Category::kCar};
  workflow::QAConfig qa;
  std::uint64_t seed{0};
};

/// What the client needs to display the scene due next. `scene_id` is a per-session handle; the
/// pool id, and with it whether the scene is golden, is never exposed.
struct SceneDescriptor
{
  std::string scene_id;
  std::size_t point_count{0};
  Category category{Category::kCar};
  std::string payload;  // path of the binary cloud
  std::string token;
  std::string phase;  // "training" or "annotation"
  std::size_t position{0};  // 1-based index within the sequence or batch
  std::size_t length{0};
};

void to_json(nlohmann::json & j, const SceneDescriptor & d);

struct CreatedSession
{
  std::string token;
  nlohmann::json state;
};

/// Session registry over the workflow state machine. Calls for one token are serialized; calls
/// for different tokens run concurrently. Errors: kUnauthorized for an unknown token, kState for
/// an out-of-order request, kNotFound for an unknown scene handle, kPoolExhausted when no batch
/// can be assembled, kParameter for malformed input.
class AnnotationService
{
public:
  explicit AnnotationService(ServiceConfig config);

  CreatedSession create_session(const std::string & annotator_id);
  nlohmann::json state(const std::string & token) const;

  /// Leaves failed_requalify by starting training, and assembles a batch from the shared pool
  /// when an annotating session has none. Repeated calls return the same handle until the scene
  /// is submitted.
  SceneDescriptor next_scene(const std::string & token);

  /// CSPC bytes of the scene behind `handle`, exactly as stored.
  std::vector<std::uint8_t> scene_payload(const std::string & token, const std::string & handle) const;

  /// Submits the scene behind `handle`, which must be the one next_scene returned.
  nlohmann::json submit(const std::string & token, const std::string & handle, const workflow::SceneSubmission & submission);

  /// Review of the last scored training scene.
  nlohmann::json review(const std::string & token) const;

  std::size_t pool_remaining() const;

private:
  struct Entry
  {
    mutable std::mutex mutex;
    workflow::AnnotatorSession session;
    std::string handle;      // handle of the scene currently due; empty until next_scene
    std::string handle_scene;
    std::size_t handle_position{0};
    bool review_visible{false};
  };

  std::shared_ptr<Entry> find(const std::string & token) const;
  std::string new_token();
  std::string new_handle();
  const std::vector<GroundTruthObject> & ground_truth(const std::string & scene_id) const;
  std::vector<std::string> take_batch_scenes();
  void return_scenes(const workflow::Batch & batch);
  nlohmann::json state_json(const Entry & entry) const;
  void log_timing(const workflow::AnnotatorSession & session, const std::string & scene_id, int n_objects, double elapsed, const char * phase);

  ServiceConfig config_;

  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t sessions_created_{0};

  mutable std::mutex pool_mutex_;
  std::deque<std::string> pool_;

  mutable std::mutex gt_mutex_;
  mutable std::map<std::string, std::vector<GroundTruthObject>> gt_cache_;

  std::mutex random_mutex_;
};

/// Splits sorted scene ids into training, golden and annotation pools when the configured pools
/// are empty: the first `training` ids, the next `golden`, and the rest.
void fill_default_pools(ServiceConfig & config, std::size_t training = 10, std::size_t golden = 5);

}  // namespace cloudseed::server

#endif  // CLOUDSEED__SERVICE_HPP_
