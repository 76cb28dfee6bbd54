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
#include <vector>

#include "auxseg/tensor.hpp"

// Synthetic shapes dataset and dataset I/O.
//
// On-disk layout (also accepted for user-supplied data):
//   <dataset>/images/<id>.png      RGB
//   <dataset>/labels/labels.json   {"<id>": [sorted class ids 1..C], ...}
//   <dataset>/saliency/<id>.png    8-bit coarse saliency
//   <dataset>/gt_masks/<id>.png    8-bit class ids, evaluation only
namespace auxseg {

struct SaliencyCorruption {
  int dilation_radius = 2;
  double blur_sigma = 2.0;
  double dropout_prob = 0.1;
  int dropout_patch = 8;

  static SaliencyCorruption none() { return {0, 0.0, 0.0, 8}; }
};

struct SynthSpec {
  int num_images = 200;
  int image_size = 64;
  std::vector<std::string> classes = {"circle", "square", "triangle"};
  int min_shapes = 1;
  int max_shapes = 3;
  double noise = 0.08;
  SaliencyCorruption corruption;
  std::uint64_t seed = 0;

  // Throws ConfigError. `stride` is the model stride the images must divide.
  void validate(int stride = 8) const;
};

// Shape names understood by the generator, in palette order.
const std::vector<std::string>& known_shapes();

struct TrainSample {
  std::string id;
  Image image;
  std::vector<int> labels;  // sorted class ids in 1..C
  FeatureMap<float> offline_saliency;
};

// Evaluation samples additionally carry the ground-truth mask. Only the
// evaluation loader produces them, so the training path cannot see GT.
struct EvalSample {
  TrainSample sample;
  LabelMask gt_mask;
};

struct TrainSet {
  std::filesystem::path root;
  std::vector<TrainSample> samples;
};

struct EvalSet {
  std::filesystem::path root;
  std::vector<EvalSample> samples;
};

// Synthesizes one sample (with its GT) deterministically from (seed, index).
EvalSample synthesize_sample(const SynthSpec& spec, int index);

// Writes spec.num_images samples into `dir` using the layout above.
void generate(const SynthSpec& spec, const std::filesystem::path& dir);

// Sorted image ids. Throws IoError/ValidationError naming the offending file.
TrainSet load_train_set(const std::filesystem::path& dir);
EvalSet load_eval_set(const std::filesystem::path& dir);

// Binary length-C target vector from class ids 1..C.
RowVector<float> label_vector(const std::vector<int>& labels, int num_classes);
// Classifier indices 0..C-1 from class ids 1..C.
std::vector<int> present_class_indices(const std::vector<int>& labels);

// Number of GT masks read since process start.
std::size_t gt_mask_load_count();

// Binary foreground (label in 1..254) of a mask as a [0, 1] map.
FeatureMap<float> foreground_map(const LabelMask& mask);

// Applies dilation, Gaussian blur and patch dropout to a binary map.
FeatureMap<float> corrupt_saliency(const FeatureMap<float>& foreground,
                                   const SaliencyCorruption& corruption, std::uint64_t seed);

}  // namespace auxseg
