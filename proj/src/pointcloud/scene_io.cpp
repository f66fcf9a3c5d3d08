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

#include "cloudseed/scene_io.hpp"

#include <algorithm>
#include <cmath>

#include "cloudseed/error.hpp"
#include "cloudseed/io.hpp"
#include "cloudseed/json_io.hpp"

namespace cloudseed::pointcloud
{
namespace
{
constexpr std::size_t kHeaderSize = 12;
}

std::vector<std::uint8_t> encode_cspc(const PointCloud & cloud)
{
  cloud.validate();
  const bool has_intensity = cloud.intensity.has_value();
  std::vector<std::uint8_t> out = {'C', 'S', 'P', 'C', kCspcVersion,
                                   static_cast<std::uint8_t>(cloud.frame),
                                   static_cast<std::uint8_t>(has_intensity ? 1 : 0), 0};
  io::put_u32(out, static_cast<std::uint32_t>(cloud.size()));
  out.reserve(kHeaderSize + cloud.size() * (has_intensity ? 16 : 12));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    io::put_f32(out, static_cast<float>(cloud.points[i].x));
    io::put_f32(out, static_cast<float>(cloud.points[i].y));
    io::put_f32(out, static_cast<float>(cloud.points[i].z));
    if (has_intensity) {
      io::put_f32(out, static_cast<float>((*cloud.intensity)[i]));
    }
  }
  return out;
}

PointCloud decode_cspc(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kHeaderSize || bytes[0] != 'C' || bytes[1] != 'S' || bytes[2] != 'P' ||
      bytes[3] != 'C') {
    throw Error(ErrorKind::kMalformedFile, "missing CSPC magic");
  }
  if (bytes[4] != kCspcVersion) {
    throw Error(ErrorKind::kMalformedFile, "unsupported CSPC version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > 1) {
    throw Error(ErrorKind::kMalformedFile, "unknown frame tag");
  }
  PointCloud cloud;
  cloud.frame = static_cast<Frame>(bytes[5]);
  const bool has_intensity = (bytes[6] & 1U) != 0;
  const std::size_t count = io::get_u32(bytes, 8);
  const std::size_t stride = has_intensity ? 16 : 12;
  if (bytes.size() != kHeaderSize + count * stride) {
    throw Error(ErrorKind::kMalformedFile, "CSPC payload size does not match point count");
  }
  cloud.points.reserve(count);
  std::vector<double> intensity;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t base = kHeaderSize + i * stride;
    const Point3 p{io::get_f32(bytes, base), io::get_f32(bytes, base + 4), io::get_f32(bytes, base + 8)};
    if (!p.finite()) {
      throw Error(ErrorKind::kMalformedFile, "non-finite point in CSPC payload");
    }
    cloud.points.push_back(p);
    if (has_intensity) {
      intensity.push_back(io::get_f32(bytes, base + 12));
    }
  }
  if (has_intensity) {
    cloud.intensity = std::move(intensity);
  }
  return cloud;
}

nlohmann::json ground_truth_json(const Scene & scene)
{
  return {{"scene_id", scene.id}, {"frame", to_string(scene.cloud.frame)}, {"objects", scene.objects}};
}

std::filesystem::path cloud_path(const std::filesystem::path & dir, const std::string & id)
{
  return dir / (id + ".cspc");
}

void save_scene(const std::filesystem::path & dir, const Scene & scene)
{
  io::write_bytes(cloud_path(dir, scene.id), encode_cspc(scene.cloud));
  io::write_text(dir / (scene.id + ".json"), ground_truth_json(scene).dump(2) + "\n");
}

Scene load_scene(const std::filesystem::path & dir, const std::string & id)
{
  Scene scene;
  scene.id = id;
  scene.cloud = decode_cspc(io::read_bytes(cloud_path(dir, id)));
  const auto sidecar = dir / (id + ".json");
  if (std::filesystem::exists(sidecar)) {
    try {
      const auto j = nlohmann::json::parse(io::read_text(sidecar));
      scene.objects = j.at("objects").get<std::vector<GroundTruthObject>>();
    } catch (const nlohmann::json::exception & e) {
      throw Error(ErrorKind::kMalformedFile, sidecar.string() + ": " + e.what());
    }
  }
  return scene;
}

std::vector<std::string> list_scenes(const std::filesystem::path & dir)
{
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "not a directory: " + dir.string());
  }
  std::vector<std::string> ids;
  for (const auto & entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cspc") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace cloudseed::pointcloud
