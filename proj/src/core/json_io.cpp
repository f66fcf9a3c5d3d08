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

#include "cloudseed/json_io.hpp"

#include "cloudseed/error.hpp"

namespace cloudseed
{

void to_json(nlohmann::json & j, const Point3 & p) { j = {{"x", p.x}, {"y", p.y}, {"z", p.z}}; }

void from_json(const nlohmann::json & j, Point3 & p)
{
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.z = j.at("z").get<double>();
}

void to_json(nlohmann::json & j, Category c) { j = std::string(to_string(c)); }

void from_json(const nlohmann::json & j, Category & c)
{
  const auto parsed = category_from_string(j.get<std::string>());
  if (!parsed) {
    throw Error(ErrorKind::kParse, "unknown category '" + j.get<std::string>() + "'");
  }
  c = *parsed;
}

void to_json(nlohmann::json & j, const Box3D & b)
{
  j = {{"cx", b.cx}, {"cy", b.cy}, {"cz", b.cz}, {"h", b.h}, {"w", b.w}, {"l", b.l}, {"ry", b.ry}};
}

void from_json(const nlohmann::json & j, Box3D & b)
{
  b.cx = j.at("cx").get<double>();
  b.cy = j.at("cy").get<double>();
  b.cz = j.at("cz").get<double>();
  b.h = j.at("h").get<double>();
  b.w = j.at("w").get<double>();
  b.l = j.at("l").get<double>();
  b.ry = j.at("ry").get<double>();
}

void to_json(nlohmann::json & j, const GroundTruthObject & o)
{
  j = {{"category", o.category}, {"box", o.box}};
}

void from_json(const nlohmann::json & j, GroundTruthObject & o)
{
  o.category = j.at("category").get<Category>();
  o.box = j.at("box").get<Box3D>();
}

}  // namespace cloudseed
