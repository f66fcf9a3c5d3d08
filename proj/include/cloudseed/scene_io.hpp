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

#ifndef CLOUDSEED__SCENE_IO_HPP_
#define CLOUDSEED__SCENE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cloudseed/types.hpp"

namespace cloudseed::pointcloud
{

/// "CSPC" point container.
///
/// Layout (little-endian):
///   bytes 0-3   magic "CSPC"
///   byte  4     version (1)
///   byte  5     frame (0 = lidar, 1 = camera)
///   byte  6     flags (bit 0: intensity present)
///   byte  7     reserved, zero
///   bytes 8-11  point count, uint32
///   records     x, y, z float32 [, intensity float32]
inline constexpr std::uint8_t kCspcVersion = 1;

std::vector<std::uint8_t> encode_cspc(const PointCloud & cloud);
PointCloud decode_cspc(std::span<const std::uint8_t> bytes);

struct Scene
{
  std::string id;
  PointCloud cloud;
  std::vector<GroundTruthObject> objects;
};

nlohmann::json ground_truth_json(const Scene & scene);

/// Writes <dir>/<id>.cspc and the <dir>/<id>.json ground-truth sidecar.
void save_scene(const std::filesystem::path & dir, const Scene & scene);
Scene load_scene(const std::filesystem::path & dir, const std::string & id);

/// Scene ids (file stems of *.cspc) in lexicographic order.
std::vector<std::string> list_scenes(const std::filesystem::path & dir);

std::filesystem::path cloud_path(const std::filesystem::path & dir, const std::string & id);

}  // namespace cloudseed::pointcloud

#endif  // CLOUDSEED__SCENE_IO_HPP_
