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

#include "cloudseed/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cloudseed/error.hpp"

namespace cloudseed::io
{
namespace
{

template <typename T>
T to_little(T value)
{
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

template <typename T>
void put(std::vector<std::uint8_t> & out, T value)
{
  const auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(to_little(value));
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t offset)
{
  if (offset + sizeof(T) > in.size()) {
    throw Error(ErrorKind::kMalformedFile, "truncated binary record");
  }
  std::array<std::uint8_t, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
  return to_little(std::bit_cast<T>(bytes));
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path & path, std::span<const std::uint8_t> bytes)
{
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorKind::kIo, "short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path & path, const std::string & text)
{
  write_bytes(
    path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

void put_u32(std::vector<std::uint8_t> & out, std::uint32_t value) { put(out, value); }
void put_u64(std::vector<std::uint8_t> & out, std::uint64_t value) { put(out, value); }
void put_f32(std::vector<std::uint8_t> & out, float value) { put(out, value); }
void put_f64(std::vector<std::uint8_t> & out, double value) { put(out, value); }

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset)
{
  return get<std::uint32_t>(in, offset);
}
std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t offset)
{
  return get<std::uint64_t>(in, offset);
}
float get_f32(std::span<const std::uint8_t> in, std::size_t offset) { return get<float>(in, offset); }
double get_f64(std::span<const std::uint8_t> in, std::size_t offset) { return get<double>(in, offset); }

}  // namespace cloudseed::io
