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

#include "cloudseed/service.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "cloudseed/error.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/rng.hpp"
#include "cloudseed/scene_io.hpp"

namespace cloudseed::server
{
namespace
{

std::string hex(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t random_u64(std::random_device & device)
{
  return (static_cast<std::uint64_t>(device()) << 32) | device();
}

}  // namespace

void to_json(nlohmann::json & j, const SceneDescriptor & d)
{
  j = {
    {"scene_id", d.scene_id},
    {"point_count", d.point_count},
    {"category", std::string(to_string(d.category))},
    {"payload", d.payload},
    {"token", d.token},
    {"phase", d.phase},
    {"position", d.position},
    {"length", d.length}};
}

void fill_default_pools(ServiceConfig & config, std::size_t training, std::size_t golden)
{
  if (!config.training_pool.empty() && !config.golden_pool.empty() && !config.annotation_pool.empty()) {
    return;
  }
  const auto ids = pointcloud::list_scenes(config.scene_dir);
  if (ids.size() < training + golden + 1) {
    throw Error(ErrorKind::kConfig, "scene directory holds too few scenes to form the pools");
  }
  config.training_pool.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(training));
  config.golden_pool.assign(ids.begin() + static_cast<std::ptrdiff_t>(training), ids.begin() + static_cast<std::ptrdiff_t>(training + golden));
  config.annotation_pool.assign(ids.begin() + static_cast<std::ptrdiff_t>(training + golden), ids.end());
}

AnnotationService::AnnotationService(ServiceConfig config) : config_(std::move(config))
{
  config_.qa.validate();
  if (static_cast<int>(config_.training_pool.size()) < config_.qa.training_scenes) {
    throw Error(ErrorKind::kConfig, "training pool is smaller than a training sequence");
  }
  if (config_.golden_pool.empty()) {
    throw Error(ErrorKind::kConfig, "golden pool is empty");
  }
  const std::set<std::string> golden(config_.golden_pool.begin(), config_.golden_pool.end());
  for (const auto & id : config_.annotation_pool) {
    if (golden.contains(id)) {
      throw Error(ErrorKind::kConfig, "scene '" + id + "' is in both the golden and annotation pools");
    }
  }
  for (const auto * pool : {&config_.training_pool, &config_.golden_pool, &config_.annotation_pool}) {
    for (const auto & id : *pool) {
      if (!std::filesystem::exists(pointcloud::cloud_path(config_.scene_dir, id))) {
        throw Error(ErrorKind::kConfig, "scene '" + id + "' is missing from " + config_.scene_dir.string());
      }
    }
  }
  pool_.assign(config_.annotation_pool.begin(), config_.annotation_pool.end());
}

std::string AnnotationService::new_token()
{
  std::lock_guard lock(random_mutex_);
  std::random_device device;
  return hex(random_u64(device)) + hex(random_u64(device));
}

std::string AnnotationService::new_handle()
{
  std::lock_guard lock(random_mutex_);
  std::random_device device;
  return hex(random_u64(device));
}

std::shared_ptr<AnnotationService::Entry> AnnotationService::find(const std::string & token) const
{
  std::shared_lock lock(registry_mutex_);
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) {
    throw Error(ErrorKind::kUnauthorized, "unknown session token");
  }
  return it->second;
}

const std::vector<GroundTruthObject> & AnnotationService::ground_truth(const std::string & scene_id) const
{
  std::lock_guard lock(gt_mutex_);
  auto it = gt_cache_.find(scene_id);
  if (it == gt_cache_.end()) {
    it = gt_cache_.emplace(scene_id, pointcloud::load_scene(config_.scene_dir, scene_id).objects).first;
  }
  return it->second;
}

std::vector<std::string> AnnotationService::take_batch_scenes()
{
  std::lock_guard lock(pool_mutex_);
  const auto n = static_cast<std::size_t>(config_.qa.batch_size);
  if (pool_.size() < n) {
    throw Error(ErrorKind::kPoolExhausted, "annotation pool holds " + std::to_string(pool_.size()) + " scenes, a batch needs " + std::to_string(n));
  }
  std::vector<std::string> taken(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(n));
  pool_.erase(pool_.begin(), pool_.begin() + static_cast<std::ptrdiff_t>(n));
  return taken;
}

void AnnotationService::return_scenes(const workflow::Batch & batch)
{
  std::lock_guard lock(pool_mutex_);
  for (std::size_t i = 0; i < batch.scene_ids.size(); ++i) {
    if (i != batch.golden_position) {
      pool_.push_back(batch.scene_ids[i]);
    }
  }
}

std::size_t AnnotationService::pool_remaining() const
{
  std::lock_guard lock(pool_mutex_);
  return pool_.size();
}

nlohmann::json AnnotationService::state_json(const Entry & entry) const
{
  const auto & s = entry.session;
  nlohmann::json batch = {{"active", s.batch.has_value()}, {"submitted", s.submissions.size()}, {"length", s.batch ? s.batch->scene_ids.size() : 0}};
  return {
    {"annotator_id", s.annotator_id},
    {"state", std::string(workflow::to_string(s.state))},
    {"category", std::string(to_string(s.category))},
    {"training", {{"position", s.training_index}, {"length", s.training_sequence.size()}, {"sequences_issued", s.sequences_issued}}},
    {"batch", batch},
    {"batches_committed", s.batches_committed},
    {"review_available", entry.review_visible && s.last_review.has_value()}};
}

void AnnotationService::log_timing(
  const workflow::AnnotatorSession & session, const std::string & scene_id, int n_objects, double elapsed, const char * phase)
{
  if (config_.timing_log.empty()) {
    return;
  }
  const nlohmann::json record = {
    {"annotator_id", session.annotator_id},
    {"scene_id", scene_id},
    {"n_objects", n_objects},
    {"elapsed_s", elapsed},
    {"phase", phase}};
  workflow::append_lines(config_.timing_log, record.dump() + "\n");
}

CreatedSession AnnotationService::create_session(const std::string & annotator_id)
{
  if (annotator_id.empty()) {
    throw Error(ErrorKind::kParameter, "annotator_id must not be empty");
  }
  auto entry = std::make_shared<Entry>();
  std::string token = new_token();
  std::unique_lock lock(registry_mutex_);
  const std::uint64_t seed = Rng::derive(config_.seed, sessions_created_++);
  entry->session = workflow::start_session(annotator_id, config_.category, config_.training_pool, config_.qa, seed);
  while (sessions_.contains(token)) {
    token = new_token();
  }
  sessions_.emplace(token, entry);
  return {token, state_json(*entry)};
}

nlohmann::json AnnotationService::state(const std::string & token) const
{
  const auto entry = find(token);
  std::lock_guard lock(entry->mutex);
  return state_json(*entry);
}

SceneDescriptor AnnotationService::next_scene(const std::string & token)
{
  const auto entry = find(token);
  std::lock_guard lock(entry->mutex);
  auto & s = entry->session;

  if (entry->handle.empty()) {
    if (s.state == workflow::SessionState::kFailedRequalify) {
      workflow::begin_training(s, config_.qa);
      entry->review_visible = false;
    }
    if (s.state == workflow::SessionState::kAnnotating && !s.batch) {
      const auto scenes = take_batch_scenes();
      const std::uint64_t seed = Rng::derive(s.seed, 0xba7c000000000000ULL + s.batches_started);
      try {
        workflow::start_batch(s, workflow::assemble_batch(scenes, config_.golden_pool, config_.qa, seed));
      } catch (...) {
        std::lock_guard pool_lock(pool_mutex_);
        pool_.insert(pool_.begin(), scenes.begin(), scenes.end());
        throw;
      }
      entry->review_visible = false;
    }
    entry->handle_scene = workflow::next_scene(s);
    entry->handle_position = s.state == workflow::SessionState::kInTraining ? s.training_index + 1 : s.submissions.size() + 1;
    entry->handle = new_handle();
  }

  const auto bytes = io::read_bytes(pointcloud::cloud_path(config_.scene_dir, entry->handle_scene));
  SceneDescriptor d;
  d.scene_id = entry->handle;
  d.point_count = pointcloud::decode_cspc(bytes).size();
  d.category = s.category;
  d.payload = "/scene/" + entry->handle + "/cloud";
  d.token = token;
  d.phase = s.state == workflow::SessionState::kInTraining ? "training" : "annotation";
  d.position = entry->handle_position;
  d.length = s.state == workflow::SessionState::kInTraining ? s.training_sequence.size() : s.batch->scene_ids.size();
  return d;
}

std::vector<std::uint8_t> AnnotationService::scene_payload(const std::string & token, const std::string & handle) const
{
  const auto entry = find(token);
  std::string scene;
  {
    std::lock_guard lock(entry->mutex);
    if (entry->handle.empty() || handle != entry->handle) {
      throw Error(ErrorKind::kNotFound, "no scene '" + handle + "' in this session");
    }
    scene = entry->handle_scene;
  }
  return io::read_bytes(pointcloud::cloud_path(config_.scene_dir, scene));
}

nlohmann::json AnnotationService::submit(
  const std::string & token, const std::string & handle, const workflow::SceneSubmission & submission)
{
  if (!(submission.elapsed >= 0.0) || !std::isfinite(submission.elapsed)) {
    throw Error(ErrorKind::kParameter, "elapsed must be a finite non-negative number of seconds");
  }
  const auto entry = find(token);
  std::lock_guard lock(entry->mutex);
  auto & s = entry->session;
  if (entry->handle.empty() || handle != entry->handle) {
    throw Error(ErrorKind::kState, "scene '" + handle + "' is not the scene due in this session");
  }
  const std::string scene_id = entry->handle_scene;
  workflow::SceneSubmission stamped = submission;
  for (auto & c : stamped.clicks) {
    c.scene_id = scene_id;
  }

  nlohmann::json response;
  if (s.state == workflow::SessionState::kInTraining) {
    const auto result = workflow::score_scene(scene_id, stamped.clicks, ground_truth(scene_id), s.category, stamped.elapsed, config_.qa);
    workflow::advance_training(s, result, config_.qa);
    entry->review_visible = true;
    entry->handle.clear();
    log_timing(s, scene_id, result.n_objects, stamped.elapsed, "training");
    response = {{"phase", "training"}, {"review_available", true}};
  } else {
    workflow::submit_batch_scene(s, scene_id, stamped);
    entry->handle.clear();
    log_timing(s, scene_id, static_cast<int>(stamped.clicks.size()), stamped.elapsed, "annotation");
    response = {{"phase", "annotation"}};
    if (workflow::batch_complete(s)) {
      const workflow::Batch batch = *s.batch;
      const auto submissions = s.submissions;
      const std::string batch_id = s.batch_id;
      const auto outcome = workflow::process_batch(s, batch, submissions, ground_truth(batch.golden_id()), config_.qa, config_.click_db, batch_id);
      if (!outcome.committed) {
        return_scenes(batch);
      }
      response["batch"] = outcome.committed ? "committed" : "discarded";
      response["records_written"] = outcome.records_written;
    }
  }
  response["state"] = state_json(*entry);
  return response;
}

nlohmann::json AnnotationService::review(const std::string & token) const
{
  const auto entry = find(token);
  std::lock_guard lock(entry->mutex);
  if (!entry->review_visible || !entry->session.last_review) {
    throw Error(ErrorKind::kNotFound, "no training review is available");
  }
  return workflow::review_payload(*entry->session.last_review);
}

}  // namespace cloudseed::server
