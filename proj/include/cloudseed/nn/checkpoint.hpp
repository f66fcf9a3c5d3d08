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

#ifndef CLOUDSEED__NN__CHECKPOINT_HPP_
#define CLOUDSEED__NN__CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "cloudseed/nn/network.hpp"

namespace cloudseed::nn
{

/// Model file: magic "CSNN1", uint32 header length, UTF-8 JSON header (arch, layout,
/// parameter_count, metadata), then parameter_count little-endian float64 values.
struct Checkpoint
{
  ModelParams params;
  nlohmann::json metadata;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelParams & params, const nlohmann::json & metadata);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(
  const std::filesystem::path & path, const ModelParams & params, const nlohmann::json & metadata);
Checkpoint load_checkpoint(const std::filesystem::path & path);

}  // namespace cloudseed::nn

#endif  // CLOUDSEED__NN__CHECKPOINT_HPP_
