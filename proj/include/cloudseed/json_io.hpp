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

#ifndef CLOUDSEED__JSON_IO_HPP_
#define CLOUDSEED__JSON_IO_HPP_

#include <json.hpp>

#include "cloudseed/types.hpp"

namespace cloudseed
{

void to_json(nlohmann::json & j, const Point3 & p);
void from_json(const nlohmann::json & j, Point3 & p);
void to_json(nlohmann::json & j, Category c);
void from_json(const nlohmann::json & j, Category & c);
void to_json(nlohmann::json & j, const Box3D & b);
void from_json(const nlohmann::json & j, Box3D & b);
void to_json(nlohmann::json & j, const GroundTruthObject & o);
void from_json(const nlohmann::json & j, GroundTruthObject & o);

}  // namespace cloudseed

#endif  // CLOUDSEED__JSON_IO_HPP_
