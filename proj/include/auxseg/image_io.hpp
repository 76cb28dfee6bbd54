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

#include <filesystem>

#include "auxseg/tensor.hpp"

// 8-bit PNG I/O. Writes are atomic (temp file + rename).
namespace auxseg::io {

// RGB image with values in [0, 1].
Image read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const Image& image);

// Single-channel map in [0, 1], stored as round(255 * v).
FeatureMap<float> read_gray_png(const std::filesystem::path& path);
void write_gray_png(const std::filesystem::path& path, const FeatureMap<float>& map);

// Raw 8-bit label values (class id, 255 = ignore).
LabelMask read_label_png(const std::filesystem::path& path);
void write_label_png(const std::filesystem::path& path, const LabelMask& mask);

}  // namespace auxseg::io
