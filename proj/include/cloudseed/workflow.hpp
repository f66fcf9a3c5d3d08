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

#ifndef CLOUDSEED__WORKFLOW_HPP_
#define CLOUDSEED__WORKFLOW_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/segmentation.hpp"
#include "cloudseed/types.hpp"

namespace cloudseed::workflow
{

using segmentation::Click;

struct QAConfig
{
  double t_object{7.0};
  double t_scene{7.0};
  double min_recall{0.8};
  double min_precision{0.6};
  int training_scenes{5};
  int batch_size{20};

  /// Throws kConfig.
  void validate() const;
};

void to_json(nlohmann::json & j, const QAConfig & c);
void from_json(const nlohmann::json & j, QAConfig & c);

/// T_max = N * t_object + t_scene.
double compute_time_budget(const QAConfig & config, int n_objects);

struct SceneResult
{
  std::string scene_id;
  std::vector<Click> clicks;
  std::vector<bool> click_inside;  // per click: inside a gt box of the scored category
  double elapsed{0.0};
  double budget{0.0};
  int n_objects{0};
  double recall{0.0};
  double precision{0.0};
  bool passed{false};
};

void to_json(nlohmann::json & j, const SceneResult & r);
void from_json(const nlohmann::json & j, SceneResult & r);

/// Scores the clicks of one scene against the gt boxes of `category`.
///
/// A click counts only if it carries `category` and lies inside a gt box of that category.
/// Scenes without gt of the category have recall 1; click-free scenes have precision 1.
SceneResult score_scene(
  const std::string & scene_id, std::span<const Click> clicks, std::span<const GroundTruthObject> gt,
  Category category, double elapsed, const QAConfig & config);

/// Review window data shown after a training scene.
nlohmann::json review_payload(const SceneResult & result);

struct Batch
{
  std::vector<std::string> scene_ids;  // batch_size work scenes plus one golden scene
  std::size_t golden_position{0};

  const std::string & golden_id() const { return scene_ids.at(golden_position); }
};

void to_json(nlohmann::json & j, const Batch & b);
void from_json(const nlohmann::json & j, Batch & b);

/// Takes the first batch_size scenes of `scene_pool` and inserts a golden scene, drawn from the
/// golden scenes not in that selection, at a uniform position in [0, batch_size].
Batch assemble_batch(
  std::span<const std::string> scene_pool, std::span<const std::string> golden_pool, const QAConfig & config,
  std::uint64_t seed);

enum class SessionState : std::uint8_t { kInTraining, kAnnotating, kFailedRequalify };

std::string_view to_string(SessionState state);

struct SceneSubmission
{
  std::vector<Click> clicks;
  double elapsed{0.0};
};

struct AnnotatorSession
{
  std::string annotator_id;
  Category category{Category::kCar};
  SessionState state{SessionState::kInTraining};
  std::uint64_t seed{0};

  std::vector<std::string> training_pool;
  std::vector<std::string> training_sequence;
  std::size_t training_index{0};
  std::uint64_t sequences_issued{0};
  bool sequence_failed{false};

  std::optional<Batch> batch;
  std::string batch_id;
  std::map<std::string, SceneSubmission> submissions;
  std::uint64_t batches_started{0};
  std::uint64_t batches_committed{0};

  std::vector<SceneResult> history;
  std::optional<SceneResult> last_review;
};

void to_json(nlohmann::json & j, const AnnotatorSession & s);
void from_json(const nlohmann::json & j, AnnotatorSession & s);

/// New session in training with its first sequence drawn from `training_pool`.
AnnotatorSession start_session(
  const std::string & annotator_id, Category category, std::vector<std::string> training_pool,
  const QAConfig & config, std::uint64_t seed);

/// Records a scored training scene. After the last scene of a sequence the session moves to
/// annotating if every scene passed, otherwise a fresh sequence is issued.
void advance_training(AnnotatorSession & session, const SceneResult & result, const QAConfig & config);

/// Leaves failed_requalify with a fresh training sequence; any unfinished batch is abandoned.
void begin_training(AnnotatorSession & session, const QAConfig & config);

/// Installs a new batch for an annotating session without an active batch.
void start_batch(AnnotatorSession & session, Batch batch);

/// Scene the annotator works on next. Throws kState when none is due (failed_requalify, or
/// annotating without a batch, or a complete batch awaiting processing).
const std::string & next_scene(const AnnotatorSession & session);

/// Stores a batch scene submission; the scene must be the one next_scene returns.
void submit_batch_scene(AnnotatorSession & session, const std::string & scene_id, SceneSubmission submission);

bool batch_complete(const AnnotatorSession & session);

struct ClickRecord
{
  std::string annotator_id;
  std::string scene_id;
  Category category{Category::kCar};
  Point3 position;
  std::int64_t timestamp_ms{0};
  std::string batch_id;
  bool tombstone{false};  // marks the matching earlier record as deleted

  friend bool operator==(const ClickRecord &, const ClickRecord &) = default;
};

void to_json(nlohmann::json & j, const ClickRecord & r);
void from_json(const nlohmann::json & j, ClickRecord & r);

/// Appends complete lines as one write under an exclusive file lock, then syncs.
void append_lines(const std::filesystem::path & path, const std::string & lines);

/// Appends records as one locked write to an append-only JSON-lines file, so concurrent
/// appenders never interleave partial lines.
void click_db_append(const std::filesystem::path & path, std::span<const ClickRecord> records);

/// Every record in file order. Missing file loads as empty; a corrupt line is a kClickDatabase
/// error naming the line number.
std::vector<ClickRecord> click_db_load(const std::filesystem::path & path);

/// Records with each tombstone applied to the latest earlier identical record.
std::vector<ClickRecord> live_clicks(std::span<const ClickRecord> records);

struct BatchOutcome
{
  bool committed{false};
  SceneResult golden;
  std::size_t records_written{0};
};

/// Scores only the golden scene. Pass appends every scene's clicks to the database and clears
/// the batch; fail persists nothing and moves the session to failed_requalify.
BatchOutcome process_batch(
  AnnotatorSession & session, const Batch & batch, const std::map<std::string, SceneSubmission> & submissions,
  std::span<const GroundTruthObject> golden_gt, const QAConfig & config, const std::filesystem::path & click_db,
  const std::string & batch_id);

}  // namespace cloudseed::workflow

#endif  // CLOUDSEED__WORKFLOW_HPP_
