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

#ifndef CLOUDSEED__IO_HPP_
#define CLOUDSEED__IO_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cloudseed::io
{

std::vector<std::uint8_t> read_bytes(const std::filesystem::path & path);
std::string read_text(const std::filesystem::path & path);

/// Writes through a temporary file and renames it into place.
void write_bytes(const std::filesystem::path & path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path & path, const std::string & text);

void put_u32(std::vector<std::uint8_t> & out, std::uint32_t value);
void put_u64(std::vector<std::uint8_t> & out, std::uint64_t value);
void put_f32(std::vector<std::uint8_t> & out, float value);
void put_f64(std::vector<std::uint8_t> & out, double value);

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset);
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset);
float get_f32(std::span<const std::uint8_t> in, std::size_t offset);
double get_f64(std::span<const std::uint8_t> in, std::size_t offset);

}  // namespace cloudseed::io

#endif  // CLOUDSEED__IO_HPP_
