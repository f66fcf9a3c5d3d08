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

#include "cloudseed/kitti.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/io.hpp"

namespace cloudseed::pointcloud
{
namespace
{

constexpr std::size_t kVelodyneRecord = 16;

std::vector<std::string_view> split_whitespace(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
    }
    if (i > start) {
      out.push_back(line.substr(start, i - start));
    }
  }
  return out;
}

std::optional<double> to_double(std::string_view token)
{
  double value = 0.0;
  const auto * end = token.data() + token.size();
  const auto result = std::from_chars(token.data(), end, value);
  if (result.ec != std::errc() || result.ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::vector<std::string_view> split_lines(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto stop = end == std::string_view::npos ? text.size() : end;
    auto line = text.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    lines.push_back(line);
    if (end == std::string_view::npos) {
      break;
    }
    start = end + 1;
  }
  return lines;
}

}  // namespace

Calibration Calibration::identity()
{
  Calibration c;
  c.tr_velo_to_cam = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  c.r0_rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  return c;
}

PointCloud parse_velodyne_bin(std::span<const std::uint8_t> raw)
{
  if (raw.size() % kVelodyneRecord != 0) {
    throw Error(
      ErrorKind::kMalformedFile,
      "velodyne scan length " + std::to_string(raw.size()) + " is not a multiple of 16");
  }
  const std::size_t n = raw.size() / kVelodyneRecord;
  PointCloud cloud;
  cloud.frame = Frame::kLidar;
  cloud.points.reserve(n);
  std::vector<double> intensity;
  intensity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * kVelodyneRecord;
    const float x = io::get_f32(raw, base);
    const float y = io::get_f32(raw, base + 4);
    const float z = io::get_f32(raw, base + 8);
    const float r = io::get_f32(raw, base + 12);
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) || !std::isfinite(r)) {
      throw Error(ErrorKind::kMalformedFile, "non-finite value in point " + std::to_string(i));
    }
    cloud.points.push_back({x, y, z});
    intensity.push_back(r);
  }
  cloud.intensity = std::move(intensity);
  return cloud;
}

std::vector<std::uint8_t> encode_velodyne_bin(const PointCloud & cloud)
{
  std::vector<std::uint8_t> out;
  out.reserve(cloud.size() * kVelodyneRecord);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto & p = cloud.points[i];
    io::put_f32(out, static_cast<float>(p.x));
    io::put_f32(out, static_cast<float>(p.y));
    io::put_f32(out, static_cast<float>(p.z));
    io::put_f32(out, cloud.intensity ? static_cast<float>((*cloud.intensity)[i]) : 0.0F);
  }
  return out;
}

std::vector<GroundTruthObject> parse_kitti_labels(std::string_view text)
{
  std::vector<GroundTruthObject> objects;
  const auto lines = split_lines(text);
  for (std::size_t line_no = 0; line_no < lines.size(); ++line_no) {
    const auto fields = split_whitespace(lines[line_no]);
    if (fields.empty()) {
      continue;
    }
    const std::string where = "line " + std::to_string(line_no + 1);
    if (fields.size() < 15) {
      throw Error(ErrorKind::kParse, where + ": expected at least 15 fields");
    }
    const auto category = category_from_string(fields[0]);
    if (!category) {
      continue;
    }
    std::array<double, 14> values{};
    for (std::size_t f = 1; f < 15; ++f) {
      const auto v = to_double(fields[f]);
      if (!v) {
        throw Error(
          ErrorKind::kParse,
          where + ": malformed numeric field " + std::to_string(f + 1) + " '" +
            std::string(fields[f]) + "'");
      }
      values[f - 1] = *v;
    }
    // values: trunc occl alpha x1 y1 x2 y2 h w l x y z ry
    Box3D box;
    box.h = values[7];
    box.w = values[8];
    box.l = values[9];
    box.cx = values[10];
    box.cy = values[11] - 0.5 * box.h;
    box.cz = values[12];
    box.ry = normalize_angle(values[13]);
    objects.push_back({*category, box});
  }
  return objects;
}

Calibration parse_kitti_calib(std::string_view text)
{
  std::map<std::string, std::vector<double>, std::less<>> entries;
  const auto lines = split_lines(text);
  for (std::size_t line_no = 0; line_no < lines.size(); ++line_no) {
    const auto line = lines[line_no];
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      continue;
    }
    const auto key_tokens = split_whitespace(line.substr(0, colon));
    if (key_tokens.size() != 1) {
      continue;
    }
    const std::string key(key_tokens.front());
    std::vector<double> values;
    for (const auto token : split_whitespace(line.substr(colon + 1))) {
      const auto v = to_double(token);
      if (!v) {
        throw Error(
          ErrorKind::kParse, "line " + std::to_string(line_no + 1) + ": malformed value in " + key);
      }
      values.push_back(*v);
    }
    entries[key] = std::move(values);
  }

  auto take = [&](std::string_view key, std::size_t count) -> std::optional<std::vector<double>> {
    const auto it = entries.find(key);
    if (it == entries.end()) {
      return std::nullopt;
    }
    if (it->second.size() != count) {
      throw Error(
        ErrorKind::kCalibrationIncomplete, std::string(key) + " expects " + std::to_string(count) +
                                             " values, got " + std::to_string(it->second.size()));
    }
    return it->second;
  };

  Calibration calib;
  const auto tr = take("Tr_velo_to_cam", 12);
  const auto r0 = take("R0_rect", 9);
  if (!tr || !r0) {
    throw Error(
      ErrorKind::kCalibrationIncomplete, !tr ? "missing Tr_velo_to_cam" : "missing R0_rect");
  }
  std::copy(tr->begin(), tr->end(), calib.tr_velo_to_cam.begin());
  std::copy(r0->begin(), r0->end(), calib.r0_rect.begin());
  if (const auto p2 = take("P2", 12)) {
    calib.p2.emplace();
    std::copy(p2->begin(), p2->end(), calib.p2->begin());
  }
  return calib;
}

PointCloud to_camera_frame(const PointCloud & cloud, const Calibration & calib)
{
  if (cloud.frame != Frame::kLidar) {
    throw Error(ErrorKind::kFrameMismatch, "cloud is already in the camera frame");
  }
  const auto & t = calib.tr_velo_to_cam;
  const auto & r = calib.r0_rect;
  PointCloud out;
  out.frame = Frame::kCamera;
  out.intensity = cloud.intensity;
  out.points.reserve(cloud.size());
  for (const auto & p : cloud.points) {
    const double a = t[0] * p.x + t[1] * p.y + t[2] * p.z + t[3];
    const double b = t[4] * p.x + t[5] * p.y + t[6] * p.z + t[7];
    const double c = t[8] * p.x + t[9] * p.y + t[10] * p.z + t[11];
    out.points.push_back(
      {r[0] * a + r[1] * b + r[2] * c, r[3] * a + r[4] * b + r[5] * c,
       r[6] * a + r[7] * b + r[8] * c});
  }
  return out;
}

}  // namespace cloudseed::pointcloud
