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
#include <vector>

#include <Eigen/Core>

namespace auxseg {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Dense H x W x C activations, stored as an (H*W) x C row-major matrix so a
// feature map flattens into the pixel-by-channel layout for free.
template <typename T>
struct FeatureMap {
  int height = 0;
  int width = 0;
  RowMatrix<T> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c)
      : height(h), width(w), data(RowMatrix<T>::Zero(h * w, c)) {}
  FeatureMap(int h, int w, RowMatrix<T> values)
      : height(h), width(w), data(std::move(values)) {}

  int channels() const { return static_cast<int>(data.cols()); }
  int pixels() const { return height * width; }

  T& at(int y, int x, int c) { return data(y * width + x, c); }
  T at(int y, int x, int c) const { return data(y * width + x, c); }

  template <typename U>
  FeatureMap<U> cast() const {
    return FeatureMap<U>(height, width, data.template cast<U>());
  }
};

using Image = FeatureMap<float>;

inline constexpr std::uint8_t kIgnoreLabel = 255;

// Integer H x W label map: class ids 0..C (0 = background) plus kIgnoreLabel.
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  LabelMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return labels.size(); }

  bool operator==(const LabelMask&) const = default;
};

}  // namespace auxseg
