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

#include "cloudseed/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cloudseed/error.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/json_io.hpp"

namespace cloudseed::eval
{
namespace
{

// Ranking shared by AP and mask matching; independent of scene order in the input.
std::vector<std::size_t> ranking(std::span<const DetectionResult> dets)
{
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) {
      return dets[a].score > dets[b].score;
    }
    return dets[a].scene_id < dets[b].scene_id;
  });
  return order;
}

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void to_json(nlohmann::json & j, const DetectionResult & d)
{
  j = {{"scene_id", d.scene_id},
       {"category", d.category},
       {"box", d.box},
       {"score", d.score},
       {"mask",
        {{"indices", d.mask.source_indices},
         {"confidence", d.mask.foreground_confidence},
         {"click", d.mask.click}}}};
}

void from_json(const nlohmann::json & j, DetectionResult & d)
{
  d.scene_id = j.at("scene_id").get<std::string>();
  d.category = j.at("category").get<Category>();
  d.box = j.at("box").get<Box3D>();
  d.score = j.at("score").get<double>();
  if (!std::isfinite(d.score)) {
    throw Error(ErrorKind::kParse, "detection score must be finite");
  }
  d.mask = {};
  if (j.contains("mask")) {
    const auto & m = j.at("mask");
    d.mask.source_indices = m.value("indices", IndexSet{});
    d.mask.foreground_confidence = m.value("confidence", std::vector<double>{});
    if (m.contains("click")) {
      d.mask.click = m.at("click").get<segmentation::Click>();
    }
    if (d.mask.foreground_confidence.size() != d.mask.source_indices.size()) {
      throw Error(ErrorKind::kParse, "mask confidence length differs from index count");
    }
  }
}

double average_precision(std::span<const DetectionResult> dets, const GroundTruthIndex & gts, double iou_threshold)
{
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorKind::kParameter, "IoU threshold must lie in (0, 1]");
  }
  std::size_t n_gt = 0;
  std::map<std::string, std::vector<bool>> taken;
  for (const auto & [scene, boxes] : gts) {
    n_gt += boxes.size();
    taken[scene].assign(boxes.size(), false);
  }
  if (dets.empty() || n_gt == 0) {
    return 0.0;
  }
  const auto order = ranking(dets);
  std::vector<std::pair<double, double>> curve;  // (recall, precision) at each distinct score
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto & det = dets[order[r]];
    const auto it = gts.find(det.scene_id);
    if (it != gts.end()) {
      auto & used = taken[det.scene_id];
      double best = -1.0;
      std::size_t best_index = 0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) {
          continue;
        }
        const double iou = geometry::box_iou_3d(det.box, it->second[g]);
        if (iou >= iou_threshold && iou > best) {
          best = iou;
          best_index = g;
        }
      }
      if (best >= 0.0) {
        used[best_index] = true;
        ++tp;
      }
    }
    const bool group_end = r + 1 == order.size() || dets[order[r + 1]].score != det.score;
    if (group_end) {
      curve.emplace_back(
        static_cast<double>(tp) / static_cast<double>(n_gt), static_cast<double>(tp) / static_cast<double>(r + 1));
    }
  }
  double sum = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double level = i / 10.0;
    double best = 0.0;
    for (const auto & [recall, precision] : curve) {
      if (recall >= level) {
        best = std::max(best, precision);
      }
    }
    sum += best;
  }
  return sum / 11.0;
}

void to_json(nlohmann::json & j, const ClassMetrics & m)
{
  j = {{"n_instances", m.n_instances},
       {"n_detections", m.n_detections},
       {"n_matched", m.n_matched},
       {"mean_iiou", m.mean_iiou},
       {"mean_centroid_error_m", m.mean_centroid_error_m},
       {"std_centroid_error_m", m.std_centroid_error_m},
       {"mean_box_iou", m.mean_box_iou},
       {"iou_threshold", m.iou_threshold},
       {"ap_3d", m.ap_3d}};
}

void from_json(const nlohmann::json & j, ClassMetrics & m)
{
  m.n_instances = j.at("n_instances").get<std::size_t>();
  m.n_detections = j.at("n_detections").get<std::size_t>();
  m.n_matched = j.at("n_matched").get<std::size_t>();
  m.mean_iiou = j.at("mean_iiou").get<double>();
  m.mean_centroid_error_m = j.at("mean_centroid_error_m").get<double>();
  m.std_centroid_error_m = j.at("std_centroid_error_m").get<double>();
  m.mean_box_iou = j.at("mean_box_iou").get<double>();
  m.iou_threshold = j.at("iou_threshold").get<double>();
  m.ap_3d = j.at("ap_3d").get<double>();
}

std::map<Category, double> default_iou_thresholds()
{
  return {{Category::kCar, 0.5}, {Category::kPedestrian, 0.25}, {Category::kCyclist, 0.25}};
}

std::map<Category, ClassMetrics> evaluate_pipeline(
  std::span<const DetectionResult> results, std::span<const EvalScene> scenes,
  const std::map<Category, double> & iou_thresholds)
{
  std::map<std::string, const EvalScene *> by_id;
  for (const auto & s : scenes) {
    if (!by_id.emplace(s.scene_id, &s).second) {
      throw Error(ErrorKind::kParameter, "duplicate scene '" + s.scene_id + "'");
    }
  }
  std::map<Category, std::vector<DetectionResult>> dets;
  for (const auto & d : results) {
    if (by_id.find(d.scene_id) == by_id.end()) {
      throw Error(ErrorKind::kParameter, "detection for unknown scene '" + d.scene_id + "'");
    }
    dets[d.category].push_back(d);
  }
  std::map<Category, GroundTruthIndex> gts;
  for (const auto & [id, scene] : by_id) {
    for (const auto & obj : scene->objects) {
      gts[obj.category][id].push_back(obj.box);
    }
  }

  std::map<Category, ClassMetrics> out;
  for (Category c : kAllCategories) {
    const auto & cat_dets = dets[c];
    const auto & cat_gts = gts[c];
    if (cat_dets.empty() && cat_gts.empty()) {
      continue;
    }
    ClassMetrics m;
    for (const auto & [id, boxes] : cat_gts) {
      m.n_instances += boxes.size();
    }
    m.n_detections = cat_dets.size();
    const auto thr = iou_thresholds.find(c);
    if (thr == iou_thresholds.end()) {
      throw Error(ErrorKind::kParameter, "no IoU threshold for " + std::string(to_string(c)));
    }
    m.iou_threshold = thr->second;
    m.ap_3d = average_precision(cat_dets, cat_gts, m.iou_threshold);

    // Gt point sets, computed once per scene.
    std::map<std::string, std::vector<IndexSet>> gt_points;
    std::map<std::string, std::vector<bool>> used;
    for (const auto & [id, boxes] : cat_gts) {
      for (const auto & b : boxes) {
        gt_points[id].push_back(geometry::points_in_box(by_id.at(id)->cloud, b));
      }
      used[id].assign(boxes.size(), false);
    }
    std::vector<double> iious;
    std::vector<double> errors;
    std::vector<double> box_ious;
    for (std::size_t r : ranking(cat_dets)) {
      const auto & det = cat_dets[r];
      const auto it = cat_gts.find(det.scene_id);
      if (it == cat_gts.end()) {
        continue;
      }
      double best = 0.0;
      std::size_t best_index = it->second.size();
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[det.scene_id][g]) {
          continue;
        }
        const double overlap = det.mask.source_indices.empty()
                                 ? geometry::box_iou_3d(det.box, it->second[g])
                                 : geometry::instance_iou(det.mask.source_indices, gt_points[det.scene_id][g]);
        if (overlap > best) {
          best = overlap;
          best_index = g;
        }
      }
      if (best_index == it->second.size()) {
        continue;
      }
      used[det.scene_id][best_index] = true;
      const Box3D & gt_box = it->second[best_index];
      iious.push_back(geometry::instance_iou(det.mask.source_indices, gt_points[det.scene_id][best_index]));
      errors.push_back(geometry::centroid_distance(det.box, gt_box));
      box_ious.push_back(geometry::box_iou_3d(det.box, gt_box));
    }
    m.n_matched = errors.size();
    if (m.n_matched > 0) {
      const double n = static_cast<double>(m.n_matched);
      m.mean_iiou = std::accumulate(iious.begin(), iious.end(), 0.0) / n;
      m.mean_centroid_error_m = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
      m.mean_box_iou = std::accumulate(box_ious.begin(), box_ious.end(), 0.0) / n;
      double ss = 0.0;
      for (double e : errors) {
        ss += (e - m.mean_centroid_error_m) * (e - m.mean_centroid_error_m);
      }
      m.std_centroid_error_m = std::sqrt(ss / n);
    }
    out[c] = m;
  }
  return out;
}

std::string metrics_csv(const std::map<Category, ClassMetrics> & metrics)
{
  std::ostringstream os;
  os << "category,n_instances,n_detections,n_matched,mean_iiou,mean_centroid_error_m,std_centroid_error_m,"
        "mean_box_iou,iou_threshold,ap_3d\n";
  for (const auto & [c, m] : metrics) {
    os << to_string(c) << ',' << m.n_instances << ',' << m.n_detections << ',' << m.n_matched << ','
       << format_double(m.mean_iiou) << ',' << format_double(m.mean_centroid_error_m) << ','
       << format_double(m.std_centroid_error_m) << ',' << format_double(m.mean_box_iou) << ','
       << format_double(m.iou_threshold) << ',' << format_double(m.ap_3d) << '\n';
  }
  return os.str();
}

nlohmann::json metrics_json(const std::map<Category, ClassMetrics> & metrics)
{
  nlohmann::json j = nlohmann::json::object();
  for (const auto & [c, m] : metrics) {
    j[std::string(to_string(c))] = m;
  }
  return j;
}

std::string results_jsonl(std::span<const DetectionResult> results)
{
  std::string out;
  for (const auto & r : results) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<DetectionResult> parse_results_jsonl(const std::string & text)
{
  std::vector<DetectionResult> out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      out.push_back(nlohmann::json::parse(line).get<DetectionResult>());
    } catch (const std::exception & e) {
      throw Error(ErrorKind::kParse, "results line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void to_json(nlohmann::json & j, const SceneTiming & t)
{
  j = {{"scene_id", t.scene_id}, {"n_objects", t.n_objects}, {"elapsed_s", t.elapsed_s}};
}

void from_json(const nlohmann::json & j, SceneTiming & t)
{
  t.scene_id = j.at("scene_id").get<std::string>();
  t.n_objects = j.at("n_objects").get<int>();
  if (j.contains("elapsed_s")) {
    t.elapsed_s = j.at("elapsed_s").get<double>();
  } else {
    t.elapsed_s = static_cast<double>(j.at("submit_ms").get<std::int64_t>() - j.at("display_ms").get<std::int64_t>()) /
                  1000.0;
  }
  if (t.n_objects < 0 || !(t.elapsed_s >= 0.0)) {
    throw Error(ErrorKind::kParse, "scene timing for '" + t.scene_id + "' is negative");
  }
}

TimingReport timing_report(std::span<const SceneTiming> scenes)
{
  TimingReport report;
  std::map<int, std::pair<std::size_t, double>> buckets;  // count, sum of per-scene seconds/object
  for (const auto & s : scenes) {
    if (s.n_objects <= 0) {
      report.excluded.push_back(s.scene_id);
      continue;
    }
    const double per_object = s.elapsed_s / s.n_objects;
    report.per_scene.emplace_back(s.n_objects, per_object);
    auto & b = buckets[s.n_objects];
    ++b.first;
    b.second += per_object;
    report.total_seconds += s.elapsed_s;
    report.total_objects += s.n_objects;
  }
  for (const auto & [n, b] : buckets) {
    report.buckets.push_back({n, b.first, b.second / static_cast<double>(b.first)});
  }
  if (report.total_objects > 0) {
    report.overall_seconds_per_object = report.total_seconds / static_cast<double>(report.total_objects);
  }
  return report;
}

std::string timing_csv(const TimingReport & report)
{
  std::ostringstream os;
  os << "n_objects,scenes,mean_seconds_per_object\n";
  for (const auto & b : report.buckets) {
    os << b.n_objects << ',' << b.scenes << ',' << format_double(b.mean_seconds_per_object) << '\n';
  }
  os << "all," << report.per_scene.size() << ',' << format_double(report.overall_seconds_per_object) << '\n';
  return os.str();
}

std::string timing_svg(const TimingReport & report)
{
  constexpr double kWidth = 640;
  constexpr double kHeight = 400;
  constexpr double kLeft = 60;
  constexpr double kRight = 20;
  constexpr double kTop = 20;
  constexpr double kBottom = 50;
  int max_n = 1;
  double max_t = 1.0;
  for (const auto & [n, t] : report.per_scene) {
    max_n = std::max(max_n, n);
    max_t = std::max(max_t, t);
  }
  max_t *= 1.1;
  auto px = [&](double n) { return kLeft + (n / (max_n + 1)) * (kWidth - kLeft - kRight); };
  auto py = [&](double t) { return kHeight - kBottom - (t / max_t) * (kHeight - kTop - kBottom); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << py(0) << "\" x2=\"" << kLeft << "\" y2=\"" << kTop
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">objects in scene</text>\n";
  os << "<text x=\"16\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 16 " << kHeight / 2
     << ")\" text-anchor=\"middle\" font-size=\"13\">seconds per object</text>\n";
  for (int n = 1; n <= max_n; ++n) {
    os << "<text x=\"" << fixed(px(n), 1) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << n << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double t = max_t * i / 4.0;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(t) + 4, 1)
       << "\" text-anchor=\"end\" font-size=\"10\">" << fixed(t, 1) << "</text>\n";
  }
  for (const auto & [n, t] : report.per_scene) {
    os << "<circle cx=\"" << fixed(px(n), 2) << "\" cy=\"" << fixed(py(t), 2)
       << "\" r=\"2.5\" fill=\"#4a7ab5\" fill-opacity=\"0.5\"/>\n";
  }
  if (!report.buckets.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < report.buckets.size(); ++i) {
      os << (i ? " " : "") << fixed(px(report.buckets[i].n_objects), 2) << ','
         << fixed(py(report.buckets[i].mean_seconds_per_object), 2);
    }
    os << "\"/>\n";
  }
  os << "<text x=\"" << kWidth - kRight << "\" y=\"" << kTop + 12 << "\" text-anchor=\"end\" font-size=\"12\">mean "
     << fixed(report.overall_seconds_per_object, 3) << " s/object</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace cloudseed::eval
