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

#include "auxseg/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "auxseg/archive.hpp"
#include "auxseg/errors.hpp"

namespace auxseg::io {
namespace {

struct RawImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

RawImage read_png(const std::filesystem::path& path, png_uint_32 format) {
  if (!std::filesystem::exists(path)) throw IoError("missing file '" + path.string() + "'");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw IoError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  image.format = format;
  RawImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

void write_png(const std::filesystem::path& path, int width, int height, png_uint_32 format,
               const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG '" + path.string() + "': " + image.message);
  }
  std::string buffer(size, '\0');
  if (!png_image_write_to_memory(&image, buffer.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot encode PNG '" + path.string() + "': " + image.message);
  }
  buffer.resize(size);
  write_file_atomic(path, buffer);
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

Image read_rgb_png(const std::filesystem::path& path) {
  RawImage raw = read_png(path, PNG_FORMAT_RGB);
  Image img(raw.height, raw.width, 3);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    img.data.data()[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  }
  return img;
}

void write_rgb_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw ShapeError("RGB PNG needs a 3-channel image");
  std::vector<std::uint8_t> px(image.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(image.data.data()[i]);
  write_png(path, image.width, image.height, PNG_FORMAT_RGB, px);
}

FeatureMap<float> read_gray_png(const std::filesystem::path& path) {
  RawImage raw = read_png(path, PNG_FORMAT_GRAY);
  FeatureMap<float> map(raw.height, raw.width, 1);
  for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
    map.data.data()[i] = static_cast<float>(raw.pixels[i]) / 255.0f;
  }
  return map;
}

void write_gray_png(const std::filesystem::path& path, const FeatureMap<float>& map) {
  if (map.channels() != 1) throw ShapeError("grayscale PNG needs a single-channel map");
  std::vector<std::uint8_t> px(map.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = to_byte(map.data.data()[i]);
  write_png(path, map.width, map.height, PNG_FORMAT_GRAY, px);
}

LabelMask read_label_png(const std::filesystem::path& path) {
  RawImage raw = read_png(path, PNG_FORMAT_GRAY);
  LabelMask mask(raw.height, raw.width);
  mask.labels = std::move(raw.pixels);
  return mask;
}

void write_label_png(const std::filesystem::path& path, const LabelMask& mask) {
  write_png(path, mask.width, mask.height, PNG_FORMAT_GRAY, mask.labels);
}

}  // namespace auxseg::io
