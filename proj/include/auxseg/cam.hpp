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
#include <string>
#include <vector>

#include "auxseg/affinity.hpp"
#include "auxseg/model.hpp"
#include "auxseg/tensor.hpp"

namespace auxseg {

// Per-class activation maps, one row of `maps` per foreground class
// (classifier index 0..C-1; segmentation label = index + 1).
struct CamStack {
  int height = 0;
  int width = 0;
  RowMatrix<float> maps;  // C x (H*W)
  std::vector<int> present_classes;

  int classes() const { return static_cast<int>(maps.rows()); }
  float at(int c, int y, int x) const { return maps(c, y * width + x); }
  float& at(int c, int y, int x) { return maps(c, y * width + x); }
};

struct ClassifierHead {
  RowMatrix<float> weights;  // K x C
  RowVector<float> bias;     // 1 x C, unused by the CAM itself
};

ClassifierHead classifier_head(const Model& model);

inline constexpr float kCamEpsilon = 1e-5f;

// CAM_c(i, j) = sum_k W[k, c] * F_k(i, j) for the present classes; rows of
// absent classes stay zero. Throws DomainError for class ids outside [0, C).
CamStack compute_cam(const BackboneFeatures<float>& features, const ClassifierHead& head,
                     const std::vector<int>& present_classes);

// Clamps negatives to zero and divides every class map by max(peak, eps).
CamStack normalize_cam(const CamStack& stack, float eps = kCamEpsilon);

// Applies an aggregation-normalized affinity `iterations` times without the
// final renormalization.
CamStack propagate_cam(const CamStack& stack, const AffinityMatrix<float>& aggregation,
                       int iterations);

// propagate_cam followed by normalize_cam.
CamStack refine_cam(const CamStack& stack, const AffinityMatrix<float>& aggregation,
                    int iterations = 1);

// Bilinear resize of every class map.
CamStack resize_cam(const CamStack& stack, int height, int width);

// Array archive holding "cams" (C x H x W) plus a JSON sidecar next to it
// (same stem, .json) recording present_classes and the image id.
void save_cam_stack(const std::filesystem::path& path, const CamStack& stack,
                    const std::string& image_id);
CamStack load_cam_stack(const std::filesystem::path& path, std::string* image_id = nullptr);

void save_affinity(const std::filesystem::path& path, const AffinityMatrix<float>& a);
AffinityMatrix<float> load_affinity(const std::filesystem::path& path);

}  // namespace auxseg
