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

#include "json.hpp"

#include "auxseg/crf.hpp"
#include "auxseg/losses.hpp"
#include "auxseg/model.hpp"
#include "auxseg/optim.hpp"
#include "auxseg/pseudo_labels.hpp"

namespace auxseg {

struct OptimConfig {
  double base_lr = 0.001;
  double power = 0.9;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Warm-up learning rate; 0 means "same as base_lr".
  double warmup_lr = 0.0;
};

struct PgtConfig {
  PgtThresholds thresholds;
  int cam_refine_iterations = 1;
  bool transpose_affinity = true;
};

struct AugmentConfig {
  bool flip = true;
  double color_jitter = 0.1;  // max relative brightness/contrast change
};

struct PathsConfig {
  std::string train = "data/train";
  std::string eval = "data/eval";
};

struct RunConfig {
  int stages = 4;
  int warmup_epochs = 15;
  int stage_epochs = 10;
  int batch_size = 4;
  int crop = 64;
  std::uint64_t seed = 0;
  PathsConfig paths;
  ModelConfig model;
  LossWeights loss;
  OptimConfig optim;
  PgtConfig pgt;
  CrfParams crf;
  AffinityMode affinity = AffinityMode::kCrossTask;
  bool sal_refine_loss = true;
  bool seg_refine_loss = true;
  AugmentConfig augment;
  // Continue from the previous stage's weights (false: restart from warm-up).
  bool continue_training = true;
  bool infer_crf = false;

  // Throws ConfigError listing every failing field.
  void validate() const;

  ForwardOptions forward_options() const;
};

// Every field, defaults included.
nlohmann::json to_json(const RunConfig& config);
// Unknown keys and wrong types are errors; missing keys keep their defaults.
// The result is validated. Throws ConfigError listing every problem.
RunConfig run_config_from_json(const nlohmann::json& j);

// "a.b.c=value"; the value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Reads a JSON file (missing path -> ConfigError), applies overrides, parses.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
RunConfig make_run_config(nlohmann::json j, const std::vector<std::string>& overrides);

}  // namespace auxseg
