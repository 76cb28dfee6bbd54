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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "auxseg/cam.hpp"
#include "auxseg/config.hpp"
#include "auxseg/data.hpp"
#include "auxseg/losses.hpp"
#include "auxseg/metrics.hpp"
#include "auxseg/model.hpp"

// Stage-wise training: classification warm-up, then S rounds of joint
// training, each followed by a pseudo-label refresh.
//
// Run directory:
//   <run>/config.json                     fully materialized RunConfig
//   <run>/manifest.json                   ordered event log
//   <run>/checkpoints/{warmup,stage_<s>}.ckpt
//   <run>/pgt/stage_<s>/{seg,sal}/<id>.png
//   <run>/metrics/{train_log,eval,pgt}.csv
//   <run>/preds/<id>.png                  final-stage eval predictions
namespace auxseg {

// Images are fed to the network centered: pixel - kInputCenter. Every
// pipeline entry point (training, label refresh, CAM export, inference)
// applies this; the raw image is kept for the CRF.
inline constexpr float kInputCenter = 0.5f;
Image network_input(const Image& image);

// ---- checkpoints ----

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const nlohmann::json& meta = nlohmann::json::object());
// The model config travels inside the checkpoint.
Model load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

// ---- pseudo labels ----

struct PgtSet {
  int stage = 0;
  std::map<std::string, LabelMask> seg;  // values 0..C or ignore
  std::map<std::string, LabelMask> sal;  // values 0/1
};

// Writes <dir>/{seg,sal}/<id>.png through a temporary sibling directory that
// is renamed into place, so an aborted write never leaves a partial stage.
void write_pgt(const std::filesystem::path& dir, const PgtSet& pgt);
// Throws PreconditionError listing every training image without labels.
PgtSet read_pgt(const std::filesystem::path& dir, const TrainSet& data, int stage);

// ---- training ----

struct TrainLogRow {
  std::string stage;  // "warmup" or the stage index
  int epoch = 0;
  int iter = 0;
  double lr = 0;
  LossReport loss;
};

// Collects per-iteration loss rows and optionally appends them to a CSV.
class TrainLog {
 public:
  explicit TrainLog(std::filesystem::path csv = {}) : csv_(std::move(csv)) {}
  void record(const TrainLogRow& row);
  const std::vector<TrainLogRow>& rows() const { return rows_; }

  static const std::vector<std::string>& header();

 private:
  std::filesystem::path csv_;
  std::vector<TrainLogRow> rows_;
};

struct TrainStats {
  int iterations = 0;
  std::vector<std::vector<double>> epoch_totals;  // total loss per iteration, per epoch
};

// Iterations per epoch: ceil(N / batch).
int iterations_per_epoch(int samples, int batch_size);

// Trains only the backbone and classifier with the multi-label loss. Throws
// ConfigError on an empty dataset.
Model warmup_classifier(const RunConfig& config, const TrainSet& data, TrainLog* log = nullptr,
                        TrainStats* stats = nullptr);
Model warmup_classifier(const RunConfig& config, const TrainSet& data, Model init,
                        TrainLog* log = nullptr, TrainStats* stats = nullptr);

// Joint training for config.stage_epochs with the composite loss against
// stage-s pseudo labels. `max_iterations` (when >= 0) stops early, for tests.
Model run_stage(int stage, const RunConfig& config, const TrainSet& data, const PgtSet& pgt,
                Model init, TrainLog* log = nullptr, TrainStats* stats = nullptr,
                int max_iterations = -1);

// Stage-0 labels: binarized offline saliency and CAM-thresholded masks from
// the warm-up classifier.
PgtSet initial_pgt(const RunConfig& config, const Model& warm, const TrainSet& data);

// Labels for stage s + 1 from the stage-s model: CAMs refined by the learned
// affinity, and CRF-updated saliency. `force_identity` replaces the affinity
// with the identity (refinement disabled).
PgtSet refresh_labels(int stage, const RunConfig& config, const Model& model,
                      const TrainSet& data, bool force_identity = false);

// Normalized CAMs of one image at input resolution, optionally refined.
CamStack image_cams(const Model& model, const Image& image, const std::vector<int>& labels,
                    const AffinityMatrix<float>* aggregation, int refine_iterations);

// ---- inference / evaluation ----

struct InferOptions {
  ForwardOptions forward;
  bool crf = false;
  CrfParams crf_params;
};

InferOptions infer_options(const RunConfig& config);

// Refined segmentation probabilities at input resolution (H x W x (C+1)).
// Sizes not divisible by the stride are reflect-padded, then cropped back.
FeatureMap<float> infer_probs(const Model& model, const Image& image, const InferOptions& options);
LabelMask infer(const Model& model, const Image& image, const InferOptions& options);
LabelMask argmax_labels(const FeatureMap<float>& probs);

// Accumulates predictions over the set; writes <preds_dir>/<id>.png when set.
ConfusionMatrix evaluate(const Model& model, const EvalSet& data, const InferOptions& options,
                         const std::filesystem::path& preds_dir = {});

// Pseudo-label quality against ground truth (metrics only).
PgtQuality measure_pgt(const PgtSet& pgt, const EvalSet& truth, int num_classes);

// ---- orchestration ----

struct StageState {
  int stage = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path pgt_dir;
  std::optional<double> eval_miou;
  std::optional<PgtQuality> pgt_quality;
};

struct RunOptions {
  std::filesystem::path run_dir;
  // Reuse this warm-up checkpoint instead of training one.
  std::optional<std::filesystem::path> warmup_checkpoint;
  // Reuse this stage-0 pseudo-label directory instead of generating one.
  std::optional<std::filesystem::path> initial_pgt_dir;
  bool evaluate = true;     // needs config.paths.eval
  bool measure_pgt = true;  // needs gt_masks under config.paths.train
  bool write_preds = true;
};

struct RunResult {
  std::vector<StageState> stages;
  std::filesystem::path warmup_checkpoint;
  std::filesystem::path final_checkpoint;
};

RunResult run_training(const RunConfig& config, const RunOptions& options);

}  // namespace auxseg
