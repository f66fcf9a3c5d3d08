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

#ifndef CLOUDSEED_TESTS__AP_ORACLE_HPP_
#define CLOUDSEED_TESTS__AP_ORACLE_HPP_

#include <algorithm>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cloudseed/eval.hpp"
#include "cloudseed/geometry.hpp"
#include "cloudseed/rng.hpp"

namespace cloudseed::testing
{

using eval::DetectionResult;
using eval::GroundTruthIndex;

inline Box3D car(double x, double z) { return {x, 1.0, z, 1.5, 1.6, 3.9, 0.0}; }

// Independent reference: for every distinct score cutoff, rematch the surviving detections
// from scratch and record (recall, precision); then take the 11-point interpolation.
inline double exhaustive_ap(const std::vector<DetectionResult> & dets, const GroundTruthIndex & gts, double thr)
{
  std::size_t n_gt = 0;
  for (const auto & [id, boxes] : gts) {
    n_gt += boxes.size();
  }
  if (dets.empty() || n_gt == 0) {
    return 0.0;
  }
  std::vector<double> cutoffs;
  for (const auto & d : dets) {
    cutoffs.push_back(d.score);
  }
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  std::vector<std::pair<double, double>> points;
  for (double cut : cutoffs) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].score >= cut) {
        kept.push_back(i);
      }
    }
    // Rank: score descending, then scene id, then input position.
    std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
      return std::make_tuple(-dets[a].score, dets[a].scene_id, a) < std::make_tuple(-dets[b].score, dets[b].scene_id, b);
    });
    std::map<std::string, std::vector<bool>> used;
    std::size_t tp = 0;
    for (std::size_t i : kept) {
      const auto it = gts.find(dets[i].scene_id);
      if (it == gts.end()) {
        continue;
      }
      auto & u = used[dets[i].scene_id];
      u.resize(it->second.size(), false);
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        const double iou = geometry::box_iou_3d(dets[i].box, it->second[g]);
        if (!u[g] && iou >= thr && (best < 0 || iou > best_iou)) {
          best = static_cast<int>(g);
          best_iou = iou;
        }
      }
      if (best >= 0) {
        u[static_cast<std::size_t>(best)] = true;
        ++tp;
      }
    }
    points.emplace_back(static_cast<double>(tp) / n_gt, static_cast<double>(tp) / kept.size());
  }
  double ap = 0.0;
  for (int i = 0; i <= 10; ++i) {
    double best = 0.0;
    for (const auto & [r, p] : points) {
      if (r >= i / 10.0) {
        best = std::max(best, p);
      }
    }
    ap += best / 11.0;
  }
  return ap;
}

struct RandomInstance
{
  std::vector<DetectionResult> dets;
  GroundTruthIndex gts;
};

inline RandomInstance random_instance(Rng & rng)
{
  RandomInstance inst;
  const int n_scenes = 1 + static_cast<int>(rng.index(3));
  const int n_gt = static_cast<int>(rng.index(6));
  std::vector<std::pair<std::string, Box3D>> all_gt;
  for (int g = 0; g < n_gt; ++g) {
    const std::string scene = "s" + std::to_string(rng.index(static_cast<std::size_t>(n_scenes)));
    const Box3D b = car(6.0 * g, 10.0);
    inst.gts[scene].push_back(b);
    all_gt.emplace_back(scene, b);
  }
  const int n_det = static_cast<int>(rng.index(11));
  for (int d = 0; d < n_det; ++d) {
    DetectionResult r;
    if (!all_gt.empty() && rng.bernoulli(0.7)) {
      const auto & [scene, b] = all_gt[rng.index(all_gt.size())];
      r.scene_id = scene;
      r.box = b;
      r.box.cx += rng.uniform(-1.5, 1.5);
      r.box.cz += rng.uniform(-1.5, 1.5);
      r.box.ry = rng.uniform(-0.5, 0.5);
    } else {
      r.scene_id = "s" + std::to_string(rng.index(static_cast<std::size_t>(n_scenes)));
      r.box = car(rng.uniform(-5, 30), rng.uniform(5, 15));
    }
    // Coarse scores so tie groups occur.
    r.score = static_cast<double>(rng.index(5)) / 4.0;
    inst.dets.push_back(r);
  }
  return inst;
}

}  // namespace cloudseed::testing

#endif  // CLOUDSEED_TESTS__AP_ORACLE_HPP_
