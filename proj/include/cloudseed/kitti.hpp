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

#ifndef CLOUDSEED__KITTI_HPP_
#define CLOUDSEED__KITTI_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cloudseed/types.hpp"

namespace cloudseed::pointcloud
{

struct Calibration
{
  std::array<double, 12> tr_velo_to_cam{};  // 3x4, row-major
  std::array<double, 9> r0_rect{};          // 3x3, row-major
  std::optional<std::array<double, 12>> p2;

  static Calibration identity();
  friend bool operator==(const Calibration &, const Calibration &) = default;
};

/// KITTI velodyne scan: little-endian float32 (x, y, z, reflectance) per point.
PointCloud parse_velodyne_bin(std::span<const std::uint8_t> raw);
std::vector<std::uint8_t> encode_velodyne_bin(const PointCloud & cloud);

/// One object per Car / Pedestrian / Cyclist line; other types are skipped.
///
/// KITTI stores the bottom-face center; the returned boxes carry the geometric
/// centroid (cy = y - h/2).
std::vector<GroundTruthObject> parse_kitti_labels(std::string_view text);

Calibration parse_kitti_calib(std::string_view text);

/// p -> R0_rect * (Tr_velo_to_cam * [p; 1]).
PointCloud to_camera_frame(const PointCloud & cloud, const Calibration & calib);

}  // namespace cloudseed::pointcloud

#endif  // CLOUDSEED__KITTI_HPP_
