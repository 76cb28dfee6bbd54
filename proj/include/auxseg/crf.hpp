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

#include "auxseg/tensor.hpp"

namespace auxseg {

// Fully connected CRF with a Gaussian spatial kernel, a bilateral
// (position + colour) kernel and Potts compatibility, solved by mean field.
struct CrfParams {
  int iterations = 10;
  double spatial_sigma = 3.0;        // pixels
  double bilateral_sigma_xy = 30.0;  // pixels at reference_size
  double bilateral_sigma_rgb = 0.1;  // intensity units, image in [0, 1]
  double spatial_weight = 3.0;
  double bilateral_weight = 5.0;
  double potts_compat = 1.0;
  // bilateral_sigma_xy is rescaled by min(H, W) / reference_size; 0 keeps it
  // as an absolute pixel value.
  int reference_size = 321;

  // Throws ConfigError. Weights may be zero (unary-only limit).
  void validate() const;
  double effective_bilateral_sigma_xy(int height, int width) const;
};

// unary_probs: H x W x L per-pixel distributions (L >= 2). Rows that do not
// sum to one are renormalized with a warning. Returns H x W x L marginals.
FeatureMap<float> dense_crf(const FeatureMap<float>& unary_probs, const Image& image,
                            const CrfParams& params);

}  // namespace auxseg
