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

#include "cloudseed/workflow.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/json_io.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::workflow
{
namespace
{

constexpr std::uint64_t kTrainingStream = 0x7a11;
constexpr std::uint64_t kGoldenStream = 0x901d;
constexpr std::uint64_t kPositionStream = 0x9051;

bool in_unit_interval(double v) { return v >= 0.0 && v <= 1.0; }

std::vector<std::string> draw_sequence(
  std::span<const std::string> pool, std::size_t count, std::uint64_t seed)
{
  if (pool.size() < count) {
    throw Error(
      ErrorKind::kPoolExhausted, "training pool has " + std::to_string(pool.size()) + " scenes, need " +
                                   std::to_string(count));
  }
  std::vector<std::string> ids(pool.begin(), pool.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  }
  ids.resize(count);
  return ids;
}

void issue_sequence(AnnotatorSession & s, const QAConfig & config)
{
  s.training_sequence = draw_sequence(
    s.training_pool, static_cast<std::size_t>(config.training_scenes),
    Rng::derive(Rng::derive(s.seed, kTrainingStream), s.sequences_issued));
  ++s.sequences_issued;
  s.training_index = 0;
  s.sequence_failed = false;
  s.state = SessionState::kInTraining;
}

void clear_batch(AnnotatorSession & s)
{
  s.batch.reset();
  s.batch_id.clear();
  s.submissions.clear();
}

SessionState state_from_string(const std::string & name)
{
  for (auto st : {SessionState::kInTraining, SessionState::kAnnotating, SessionState::kFailedRequalify}) {
    if (to_string(st) == name) {
      return st;
    }
  }
  throw Error(ErrorKind::kParse, "unknown session state '" + name + "'");
}

// Full-buffer write; O_APPEND places the whole buffer at the end of file.
void write_all(int fd, const std::string & data, const std::filesystem::path & path)
{
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw Error(ErrorKind::kClickDatabase, "write to " + path.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

class FileLock
{
public:
  FileLock(int fd, int op) : fd_(fd)
  {
    while (::flock(fd_, op) != 0) {
      if (errno != EINTR) {
        throw Error(ErrorKind::kClickDatabase, std::string("flock failed: ") + std::strerror(errno));
      }
    }
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }
  FileLock(const FileLock &) = delete;
  FileLock & operator=(const FileLock &) = delete;

private:
  int fd_;
};

class Descriptor
{
public:
  explicit Descriptor(int fd) : fd_(fd) {}
  ~Descriptor()
  {
    if (fd_ >= 0) {
      ::close(fd_);
    }
  }
  Descriptor(const Descriptor &) = delete;
  Descriptor & operator=(const Descriptor &) = delete;
  int get() const { return fd_; }

private:
  int fd_;
};

}  // namespace

void QAConfig::validate() const
{
  if (!(t_object > 0.0) || !(t_scene > 0.0)) {
    throw Error(ErrorKind::kConfig, "t_object and t_scene must be positive");
  }
  if (!in_unit_interval(min_recall) || !in_unit_interval(min_precision)) {
    throw Error(ErrorKind::kConfig, "min_recall and min_precision must lie in [0, 1]");
  }
  if (training_scenes < 1 || batch_size < 1) {
    throw Error(ErrorKind::kConfig, "training_scenes and batch_size must be positive");
  }
}

void to_json(nlohmann::json & j, const QAConfig & c)
{
  j = {{"t_object", c.t_object},           {"t_scene", c.t_scene},
       {"min_recall", c.min_recall},       {"min_precision", c.min_precision},
       {"training_scenes", c.training_scenes}, {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json & j, QAConfig & c)
{
  c.t_object = j.value("t_object", c.t_object);
  c.t_scene = j.value("t_scene", c.t_scene);
  c.min_recall = j.value("min_recall", c.min_recall);
  c.min_precision = j.value("min_precision", c.min_precision);
  c.training_scenes = j.value("training_scenes", c.training_scenes);
  c.batch_size = j.value("batch_size", c.batch_size);
}

double compute_time_budget(const QAConfig & config, int n_objects)
{
  if (n_objects < 0) {
    throw Error(ErrorKind::kParameter, "object count must be non-negative");
  }
  return n_objects * config.t_object + config.t_scene;
}

void to_json(nlohmann::json & j, const SceneResult & r)
{
  j = {{"scene_id", r.scene_id}, {"clicks", r.clicks},       {"click_inside", r.click_inside},
       {"elapsed", r.elapsed},   {"budget", r.budget},       {"n_objects", r.n_objects},
       {"recall", r.recall},     {"precision", r.precision}, {"passed", r.passed}};
}

void from_json(const nlohmann::json & j, SceneResult & r)
{
  r.scene_id = j.at("scene_id").get<std::string>();
  r.clicks = j.at("clicks").get<std::vector<Click>>();
  r.click_inside = j.at("click_inside").get<std::vector<bool>>();
  r.elapsed = j.at("elapsed").get<double>();
  r.budget = j.at("budget").get<double>();
  r.n_objects = j.at("n_objects").get<int>();
  r.recall = j.at("recall").get<double>();
  r.precision = j.at("precision").get<double>();
  r.passed = j.at("passed").get<bool>();
}

SceneResult score_scene(
  const std::string & scene_id, std::span<const Click> clicks, std::span<const GroundTruthObject> gt,
  Category category, double elapsed, const QAConfig & config)
{
  std::vector<const Box3D *> boxes;
  for (const auto & obj : gt) {
    if (obj.category == category) {
      boxes.push_back(&obj.box);
    }
  }
  SceneResult r;
  r.scene_id = scene_id;
  r.clicks.assign(clicks.begin(), clicks.end());
  r.elapsed = elapsed;
  r.n_objects = static_cast<int>(boxes.size());
  r.budget = compute_time_budget(config, r.n_objects);

  std::vector<bool> hit(boxes.size(), false);
  std::size_t inside = 0;
  for (const auto & click : clicks) {
    bool any = false;
    if (click.category == category) {
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        if (geometry::contains(*boxes[b], click.position)) {
          hit[b] = true;
          any = true;
        }
      }
    }
    r.click_inside.push_back(any);
    inside += any ? 1 : 0;
  }
  const auto found = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
  r.recall = boxes.empty() ? 1.0 : static_cast<double>(found) / static_cast<double>(boxes.size());
  r.precision = clicks.empty() ? 1.0 : static_cast<double>(inside) / static_cast<double>(clicks.size());
  r.passed = r.recall >= config.min_recall && r.precision >= config.min_precision && elapsed <= r.budget;
  return r;
}

nlohmann::json review_payload(const SceneResult & result)
{
  nlohmann::json clicks = nlohmann::json::array();
  for (std::size_t i = 0; i < result.clicks.size(); ++i) {
    const auto & c = result.clicks[i];
    clicks.push_back(
      {{"x", c.position.x}, {"y", c.position.y}, {"z", c.position.z}, {"inside", bool(result.click_inside[i])}});
  }
  return {{"scene_id", result.scene_id}, {"clicks", clicks},          {"recall", result.recall},
          {"precision", result.precision}, {"elapsed", result.elapsed}, {"budget", result.budget},
          {"passed", result.passed}};
}

void to_json(nlohmann::json & j, const Batch & b)
{
  j = {{"scene_ids", b.scene_ids}, {"golden_position", b.golden_position}};
}

void from_json(const nlohmann::json & j, Batch & b)
{
  b.scene_ids = j.at("scene_ids").get<std::vector<std::string>>();
  b.golden_position = j.at("golden_position").get<std::size_t>();
  if (b.golden_position >= b.scene_ids.size()) {
    throw Error(ErrorKind::kParse, "golden position outside the batch");
  }
}

Batch assemble_batch(
  std::span<const std::string> scene_pool, std::span<const std::string> golden_pool, const QAConfig & config,
  std::uint64_t seed)
{
  const auto size = static_cast<std::size_t>(config.batch_size);
  if (scene_pool.size() < size) {
    throw Error(
      ErrorKind::kPoolExhausted,
      "scene pool has " + std::to_string(scene_pool.size()) + " scenes, batch needs " + std::to_string(size));
  }
  Batch batch;
  batch.scene_ids.assign(scene_pool.begin(), scene_pool.begin() + static_cast<std::ptrdiff_t>(size));
  std::vector<std::string> candidates;
  for (const auto & g : golden_pool) {
    if (std::find(batch.scene_ids.begin(), batch.scene_ids.end(), g) == batch.scene_ids.end()) {
      candidates.push_back(g);
    }
  }
  if (candidates.empty()) {
    throw Error(ErrorKind::kPoolExhausted, "no golden scene outside the batch selection");
  }
  Rng golden_rng(Rng::derive(seed, kGoldenStream));
  const std::string golden = candidates[golden_rng.index(candidates.size())];
  Rng position_rng(Rng::derive(seed, kPositionStream));
  batch.golden_position = position_rng.index(size + 1);
  batch.scene_ids.insert(batch.scene_ids.begin() + static_cast<std::ptrdiff_t>(batch.golden_position), golden);
  return batch;
}

std::string_view to_string(SessionState state)
{
  switch (state) {
    case SessionState::kInTraining:
      return "in_training";
    case SessionState::kAnnotating:
      return "annotating";
    case SessionState::kFailedRequalify:
      return "failed_requalify";
  }
  return "unknown";
}

void to_json(nlohmann::json & j, const AnnotatorSession & s)
{
  nlohmann::json submissions = nlohmann::json::object();
  for (const auto & [id, sub] : s.submissions) {
    submissions[id] = {{"clicks", sub.clicks}, {"elapsed", sub.elapsed}};
  }
  j = {{"annotator_id", s.annotator_id},
       {"category", s.category},
       {"state", to_string(s.state)},
       {"seed", s.seed},
       {"training_pool", s.training_pool},
       {"training_sequence", s.training_sequence},
       {"training_index", s.training_index},
       {"sequences_issued", s.sequences_issued},
       {"sequence_failed", s.sequence_failed},
       {"batch", s.batch ? nlohmann::json(*s.batch) : nlohmann::json(nullptr)},
       {"batch_id", s.batch_id},
       {"submissions", submissions},
       {"batches_started", s.batches_started},
       {"batches_committed", s.batches_committed},
       {"history", s.history},
       {"last_review", s.last_review ? nlohmann::json(*s.last_review) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json & j, AnnotatorSession & s)
{
  s.annotator_id = j.at("annotator_id").get<std::string>();
  s.category = j.at("category").get<Category>();
  s.state = state_from_string(j.at("state").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.training_pool = j.at("training_pool").get<std::vector<std::string>>();
  s.training_sequence = j.at("training_sequence").get<std::vector<std::string>>();
  s.training_index = j.at("training_index").get<std::size_t>();
  s.sequences_issued = j.at("sequences_issued").get<std::uint64_t>();
  s.sequence_failed = j.at("sequence_failed").get<bool>();
  s.batch.reset();
  if (!j.at("batch").is_null()) {
    s.batch = j.at("batch").get<Batch>();
  }
  s.batch_id = j.at("batch_id").get<std::string>();
  s.submissions.clear();
  for (const auto & [id, sub] : j.at("submissions").items()) {
    s.submissions[id] = {sub.at("clicks").get<std::vector<Click>>(), sub.at("elapsed").get<double>()};
  }
  s.batches_started = j.at("batches_started").get<std::uint64_t>();
  s.batches_committed = j.at("batches_committed").get<std::uint64_t>();
  s.history = j.at("history").get<std::vector<SceneResult>>();
  s.last_review.reset();
  if (!j.at("last_review").is_null()) {
    s.last_review = j.at("last_review").get<SceneResult>();
  }
}

AnnotatorSession start_session(
  const std::string & annotator_id, Category category, std::vector<std::string> training_pool,
  const QAConfig & config, std::uint64_t seed)
{
  config.validate();
  AnnotatorSession s;
  s.annotator_id = annotator_id;
  s.category = category;
  s.seed = seed;
  s.training_pool = std::move(training_pool);
  issue_sequence(s, config);
  return s;
}

void advance_training(AnnotatorSession & session, const SceneResult & result, const QAConfig & config)
{
  if (session.state != SessionState::kInTraining) {
    throw Error(ErrorKind::kState, "advance_training outside training (state " +
                                     std::string(to_string(session.state)) + ")");
  }
  if (result.scene_id != session.training_sequence.at(session.training_index)) {
    throw Error(ErrorKind::kState, "training result for '" + result.scene_id + "' but scene '" +
                                     session.training_sequence[session.training_index] + "' is due");
  }
  session.history.push_back(result);
  session.last_review = result;
  session.sequence_failed = session.sequence_failed || !result.passed;
  ++session.training_index;
  if (session.training_index < session.training_sequence.size()) {
    return;
  }
  if (session.sequence_failed) {
    issue_sequence(session, config);
  } else {
    session.state = SessionState::kAnnotating;
    session.training_index = 0;
  }
}

void begin_training(AnnotatorSession & session, const QAConfig & config)
{
  if (session.state != SessionState::kFailedRequalify) {
    throw Error(ErrorKind::kState, "begin_training requires failed_requalify (state " +
                                     std::string(to_string(session.state)) + ")");
  }
  clear_batch(session);
  issue_sequence(session, config);
}

void start_batch(AnnotatorSession & session, Batch batch)
{
  if (session.state != SessionState::kAnnotating) {
    throw Error(ErrorKind::kState, "batches start only while annotating");
  }
  if (session.batch) {
    throw Error(ErrorKind::kState, "a batch is already active");
  }
  if (batch.scene_ids.empty() || batch.golden_position >= batch.scene_ids.size()) {
    throw Error(ErrorKind::kParameter, "malformed batch");
  }
  session.batch = std::move(batch);
  session.batch_id = session.annotator_id + "-b" + std::to_string(session.batches_started);
  ++session.batches_started;
  session.submissions.clear();
}

const std::string & next_scene(const AnnotatorSession & session)
{
  switch (session.state) {
    case SessionState::kInTraining:
      return session.training_sequence.at(session.training_index);
    case SessionState::kAnnotating:
      if (!session.batch) {
        throw Error(ErrorKind::kState, "no active batch");
      }
      if (session.submissions.size() >= session.batch->scene_ids.size()) {
        throw Error(ErrorKind::kState, "batch complete and awaiting processing");
      }
      return session.batch->scene_ids[session.submissions.size()];
    case SessionState::kFailedRequalify:
      break;
  }
  throw Error(ErrorKind::kState, "training must be retaken");
}

void submit_batch_scene(AnnotatorSession & session, const std::string & scene_id, SceneSubmission submission)
{
  if (session.state != SessionState::kAnnotating) {
    throw Error(ErrorKind::kState, "batch submissions require the annotating state");
  }
  const std::string & due = next_scene(session);
  if (scene_id != due) {
    throw Error(ErrorKind::kState, "submission for '" + scene_id + "' but scene '" + due + "' is due");
  }
  session.submissions[scene_id] = std::move(submission);
}

bool batch_complete(const AnnotatorSession & session)
{
  return session.batch && session.submissions.size() == session.batch->scene_ids.size();
}

void to_json(nlohmann::json & j, const ClickRecord & r)
{
  j = {{"annotator_id", r.annotator_id},
       {"scene_id", r.scene_id},
       {"category", r.category},
       {"x", r.position.x},
       {"y", r.position.y},
       {"z", r.position.z},
       {"timestamp_ms", r.timestamp_ms},
       {"batch_id", r.batch_id}};
  if (r.tombstone) {
    j["tombstone"] = true;
  }
}

void from_json(const nlohmann::json & j, ClickRecord & r)
{
  r.annotator_id = j.at("annotator_id").get<std::string>();
  r.scene_id = j.at("scene_id").get<std::string>();
  r.category = j.at("category").get<Category>();
  r.position = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>()};
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  r.batch_id = j.at("batch_id").get<std::string>();
  r.tombstone = j.value("tombstone", false);
}

void append_lines(const std::filesystem::path & path, const std::string & lines)
{
  if (lines.empty()) {
    return;
  }
  Descriptor fd(::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
  if (fd.get() < 0) {
    throw Error(ErrorKind::kClickDatabase, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  FileLock lock(fd.get(), LOCK_EX);
  write_all(fd.get(), lines, path);
  if (::fsync(fd.get()) != 0) {
    throw Error(ErrorKind::kClickDatabase, "fsync of " + path.string() + " failed: " + std::strerror(errno));
  }
}

void click_db_append(const std::filesystem::path & path, std::span<const ClickRecord> records)
{
  std::string payload;
  for (const auto & r : records) {
    payload += nlohmann::json(r).dump();
    payload += '\n';
  }
  append_lines(path, payload);
}

std::vector<ClickRecord> click_db_load(const std::filesystem::path & path)
{
  Descriptor fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (fd.get() < 0) {
    if (errno == ENOENT) {
      return {};
    }
    throw Error(ErrorKind::kClickDatabase, "cannot open " + path.string() + ": " + std::strerror(errno));
  }
  std::string text;
  {
    FileLock lock(fd.get(), LOCK_SH);
    char buf[1 << 16];
    for (;;) {
      const ssize_t n = ::read(fd.get(), buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR) {
          continue;
        }
        throw Error(ErrorKind::kClickDatabase, "read of " + path.string() + " failed: " + std::strerror(errno));
      }
      if (n == 0) {
        break;
      }
      text.append(buf, static_cast<std::size_t>(n));
    }
  }
  std::vector<ClickRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    ++line_no;
    const std::size_t end = text.find('\n', start);
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (end == std::string::npos) {
      throw Error(ErrorKind::kClickDatabase, where + ": unterminated record");
    }
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    try {
      out.push_back(nlohmann::json::parse(line).get<ClickRecord>());
    } catch (const nlohmann::json::exception & e) {
      throw Error(ErrorKind::kClickDatabase, where + ": " + e.what());
    } catch (const Error & e) {
      throw Error(ErrorKind::kClickDatabase, where + ": " + e.what());
    }
  }
  return out;
}

std::vector<ClickRecord> live_clicks(std::span<const ClickRecord> records)
{
  std::vector<ClickRecord> live;
  for (const auto & r : records) {
    if (!r.tombstone) {
      live.push_back(r);
      continue;
    }
    ClickRecord target = r;
    target.tombstone = false;
    const auto it = std::find(live.rbegin(), live.rend(), target);
    if (it != live.rend()) {
      live.erase(std::next(it).base());
    }
  }
  return live;
}

BatchOutcome process_batch(
  AnnotatorSession & session, const Batch & batch, const std::map<std::string, SceneSubmission> & submissions,
  std::span<const GroundTruthObject> golden_gt, const QAConfig & config, const std::filesystem::path & click_db,
  const std::string & batch_id)
{
  if (session.state != SessionState::kAnnotating) {
    throw Error(ErrorKind::kState, "process_batch requires the annotating state");
  }
  for (const auto & id : batch.scene_ids) {
    if (submissions.find(id) == submissions.end()) {
      throw Error(ErrorKind::kIncompleteBatch, "no submission for scene '" + id + "'");
    }
  }
  const auto & golden = submissions.at(batch.golden_id());
  BatchOutcome outcome;
  outcome.golden =
    score_scene(batch.golden_id(), golden.clicks, golden_gt, session.category, golden.elapsed, config);
  if (!outcome.golden.passed) {
    clear_batch(session);
    session.state = SessionState::kFailedRequalify;
    return outcome;
  }
  std::vector<ClickRecord> records;
  for (const auto & id : batch.scene_ids) {
    for (const auto & c : submissions.at(id).clicks) {
      records.push_back({session.annotator_id, id, c.category, c.position, c.timestamp_ms, batch_id, false});
    }
  }
  click_db_append(click_db, records);
  outcome.committed = true;
  outcome.records_written = records.size();
  ++session.batches_committed;
  clear_batch(session);
  return outcome;
}

}  // namespace cloudseed::workflow
