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

#include "cloudseed/nn/checkpoint.hpp"

#include <string>

#include "cloudseed/error.hpp"
#include "cloudseed/io.hpp"

namespace cloudseed::nn
{
namespace
{
constexpr std::string_view kMagic = "CSNN1";
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams & params, const nlohmann::json & metadata)
{
  params.validate();
  const nlohmann::json header = {
    {"arch", params.arch},
    {"layout", layout_json(params.layout)},
    {"parameter_count", params.values.size()},
    {"metadata", metadata}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + params.values.size() * 8);
  for (double v : params.values) {
    io::put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < kMagic.size() + 4 ||
      std::string_view(reinterpret_cast<const char *>(bytes.data()), kMagic.size()) != kMagic) {
    throw Error(ErrorKind::kMalformedFile, "missing CSNN1 magic");
  }
  const std::size_t header_len = io::get_u32(bytes, kMagic.size());
  const std::size_t header_start = kMagic.size() + 4;
  if (header_start + header_len > bytes.size()) {
    throw Error(ErrorKind::kMalformedFile, "truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(
      std::string_view(reinterpret_cast<const char *>(bytes.data()) + header_start, header_len));
  } catch (const nlohmann::json::exception & e) {
    throw Error(ErrorKind::kMalformedFile, std::string("checkpoint header: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.params = ModelParams::zeros(header.at("arch").get<ArchDescriptor>());
  const auto count = header.at("parameter_count").get<std::size_t>();
  if (count != ckpt.params.values.size()) {
    throw Error(ErrorKind::kMalformedFile, "checkpoint parameter count disagrees with its architecture");
  }
  const std::size_t payload = header_start + header_len;
  if (bytes.size() != payload + count * 8) {
    throw Error(ErrorKind::kMalformedFile, "checkpoint payload size mismatch");
  }
  for (std::size_t i = 0; i < count; ++i) {
    ckpt.params.values[i] = io::get_f64(bytes, payload + i * 8);
  }
  ckpt.params.validate();
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  return ckpt;
}

void save_checkpoint(
  const std::filesystem::path & path, const ModelParams & params, const nlohmann::json & metadata)
{
  io::write_bytes(path, encode_checkpoint(params, metadata));
}

Checkpoint load_checkpoint(const std::filesystem::path & path)
{
  return decode_checkpoint(io::read_bytes(path));
}

}  // namespace cloudseed::nn
