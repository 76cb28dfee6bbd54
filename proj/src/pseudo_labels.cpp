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

#include "auxseg/pseudo_labels.hpp"

#include <fmt/format.h>

#include "auxseg/errors.hpp"

namespace auxseg {

void PgtThresholds::validate() const {
  std::vector<std::string> problems;
  if (!(foreground > 0 && foreground < 1)) {
    problems.push_back(fmt::format("theta_fg={} must lie in (0, 1)", foreground));
  }
  if (!(background > 0 && background < 1)) {
    problems.push_back(fmt::format("theta_bg={} must lie in (0, 1)", background));
  }
  if (!problems.empty()) {
    std::string msg = "invalid pseudo-label thresholds:";
    for (const auto& p : problems) msg += "\n  pgt." + p;
    throw DomainError(msg);
  }
}

LabelMask binarize(const FeatureMap<float>& map, float threshold) {
  LabelMask out(map.height, map.width);
  for (int i = 0; i < map.pixels(); ++i) out.labels[i] = map.data(i, 0) >= threshold ? 1 : 0;
  return out;
}

SaliencyPgt update_saliency_pgt(int stage, const FeatureMap<float>& offline,
                                const FeatureMap<float>* refined, const Image& image,
                                const CrfParams& crf) {
  if (stage < 0) throw DomainError("stage index must be non-negative");
  if (offline.channels() != 1) throw ShapeError("offline saliency must be single-channel");
  if (stage == 0) return {binarize(offline), 0, PgtSource::kOffline};
  if (!refined) {
    throw PreconditionError(
        fmt::format("stage {} saliency update needs the previous stage's refined saliency", stage));
  }
  if (refined->height != offline.height || refined->width != offline.width ||
      refined->channels() != 1) {
    throw ShapeError("refined saliency must match the offline map");
  }
  FeatureMap<float> unary(offline.height, offline.width, 2);
  for (int i = 0; i < offline.pixels(); ++i) {
    const float avg = 0.5f * (refined->data(i, 0) + offline.data(i, 0));
    unary.data(i, 0) = 1.0f - avg;
    unary.data(i, 1) = avg;
  }
  const FeatureMap<float> q = dense_crf(unary, image, crf);
  LabelMask out(offline.height, offline.width);
  for (int i = 0; i < q.pixels(); ++i) out.labels[i] = q.data(i, 1) > q.data(i, 0) ? 1 : 0;
  return {std::move(out), stage, PgtSource::kUpdated};
}

LabelMask generate_seg_pgt(const CamStack& cam, const FeatureMap<float>& saliency,
                           const std::vector<int>& present_classes,
                           const PgtThresholds& thresholds) {
  thresholds.validate();
  if (cam.height != saliency.height || cam.width != saliency.width) {
    throw ShapeError(fmt::format("CAM grid {}x{} differs from saliency {}x{}", cam.height,
                                 cam.width, saliency.height, saliency.width));
  }
  for (int c : present_classes) {
    if (c < 0 || c >= cam.classes()) throw DomainError(fmt::format("class id {} out of range", c));
  }
  LabelMask out(cam.height, cam.width);
  for (int i = 0; i < saliency.pixels(); ++i) {
    float best = 0.0f;
    int best_class = -1;
    for (int c : present_classes) {
      const float v = cam.maps(c, i);
      if (best_class < 0 || v > best) {
        best = v;
        best_class = c;
      }
    }
    const float s = saliency.data(i, 0);
    const bool confident = best_class >= 0 && best >= thresholds.foreground;
    if (confident && s > thresholds.background) {
      out.labels[i] = static_cast<std::uint8_t>(best_class + 1);
    } else if (!confident && s <= thresholds.background) {
      out.labels[i] = 0;
    } else {
      out.labels[i] = kIgnoreLabel;
    }
  }
  return out;
}

LabelMask bootstrap_initial_seg_pgt(const CamStack& cam, const FeatureMap<float>& saliency,
                                    const std::vector<int>& present_classes,
                                    const PgtThresholds& thresholds) {
  return generate_seg_pgt(cam, saliency, present_classes, thresholds);
}

}  // namespace auxseg
