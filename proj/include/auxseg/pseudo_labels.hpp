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

#include <vector>

#include "auxseg/cam.hpp"
#include "auxseg/crf.hpp"
#include "auxseg/tensor.hpp"

namespace auxseg {

enum class PgtSource { kOffline, kUpdated };

// Binary saliency supervision; map values are 0 or 1.
struct SaliencyPgt {
  LabelMask map;
  int stage = 0;
  PgtSource source = PgtSource::kOffline;
};

struct PgtThresholds {
  float foreground = 0.3f;  // minimum normalized CAM for an object pixel
  float background = 0.06f; // maximum saliency for a background pixel

  void validate() const;
};

inline constexpr float kSaliencyBinarizeThreshold = 0.5f;

// map >= threshold -> 1, else 0.
LabelMask binarize(const FeatureMap<float>& map, float threshold = kSaliencyBinarizeThreshold);

// Stage 0: the binarized offline map (refined is ignored even if given).
// Stage s > 0: CRF over the mean of the previous stage's refined saliency and
// the offline map, then per-pixel argmax. Throws PreconditionError when
// s > 0 and refined is null.
SaliencyPgt update_saliency_pgt(int stage, const FeatureMap<float>& offline,
                                const FeatureMap<float>* refined, const Image& image,
                                const CrfParams& crf);

// Hard-threshold rule per pixel, with m the max normalized CAM over present
// classes and c* its argmax:
//   m >= fg and saliency >  bg  -> c* + 1
//   m <  fg and saliency <= bg  -> 0 (background)
//   otherwise                   -> ignore
// `cam` must already be at the saliency resolution.
LabelMask generate_seg_pgt(const CamStack& cam, const FeatureMap<float>& saliency,
                           const std::vector<int>& present_classes,
                           const PgtThresholds& thresholds = {});

// Stage-0 labels from the unrefined warm-up CAMs; same rule as above.
LabelMask bootstrap_initial_seg_pgt(const CamStack& cam, const FeatureMap<float>& saliency,
                                    const std::vector<int>& present_classes,
                                    const PgtThresholds& thresholds = {});

}  // namespace auxseg
