/*
 * Copyright 2026 The mia Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mia/autograd.hpp"
#include "mia/model.hpp"

namespace mia {

// Layout, all integers little-endian:
//   "MIACKPT1"
//   u32 tag length, tag bytes (model variant)
//   u32 entry count
//   per entry: u32 name length, name bytes, u32 rank, rank x u64 dims,
//              numel x f64 payload
//   u32 CRC-32 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'A', 'C', 'K', 'P', 'T', '1'};

struct CheckpointData {
  std::string variant;
  std::vector<NamedTensor> entries;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Overwrites the parameters of `model` with the checkpoint contents. The
/// variant tag and every parameter name and shape must agree.
void load_checkpoint(const std::filesystem::path& path, Model& model);

}  // namespace mia
