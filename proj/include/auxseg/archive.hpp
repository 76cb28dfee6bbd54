/*
 * Copyright 2026 The AuxSeg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

// Array archive: a JSON manifest followed by raw little-endian float32
// buffers, one per array, in manifest order. Checkpoints, CAM stacks and
// affinity exports all use it.
//
// Byte layout:
//   8 bytes   magic "AUXARR1\n"
//   8 bytes   manifest length L (uint64, little-endian)
//   L bytes   manifest JSON: {"format": "auxseg-array-archive", "version": 1,
//             "meta": {...}, "arrays": [{"name", "shape", "dtype": "float32",
//             "offset", "nbytes"}, ...]}; offsets are relative to the first
//             buffer byte
//   ...       concatenated buffers
namespace auxseg {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;
};

struct ArrayArchive {
  std::vector<NamedArray> arrays;
  nlohmann::json meta = nlohmann::json::object();

  const NamedArray* find(std::string_view name) const;
  // Throws ValidationError when the array is missing.
  const NamedArray& get(std::string_view name) const;
};

void write_archive(const std::filesystem::path& path, const ArrayArchive& archive);
ArrayArchive read_archive(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace auxseg
