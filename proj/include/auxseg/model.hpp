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
#include <string>
#include <string_view>
#include <vector>

#include "auxseg/affinity.hpp"
#include "auxseg/nn.hpp"
#include "auxseg/tensor.hpp"

// Shared backbone with three task heads: GAP classification, saliency
// decoding and segmentation decoding, joined by the cross-task affinity
// module.
//
// Parameter count for a config (K = backbone_width, D = head_width,
// C = num_classes, h = fusion_hidden, L = backbone_depth):
//   backbone     (27K + K) + (L - 1)(9K^2 + K)
//   classifier   KC + C
//   each head    (9KD + D) + (9D^2 + D)          x2
//   non-local    3D^2                            x2
//   fusion       2h + h + 2h + 2
//   saliency     D + 1
//   segmentation D(C + 1) + (C + 1)
namespace auxseg {

struct ModelConfig {
  int backbone_depth = 4;
  int backbone_width = 32;
  int head_width = 16;
  int num_classes = 3;
  int stride = 8;
  int fusion_hidden = 8;
  std::uint64_t seed = 0;

  // Throws ConfigError listing every invalid field.
  void validate() const;
  std::int64_t parameter_count() const;
  // Number of stride-2 blocks at the start of the backbone.
  int downsampling_blocks() const;
};

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  RowMatrix<T> value;
};

template <typename T>
class ParamSet {
 public:
  int add(std::string name, std::vector<int> shape, int rows, int cols) {
    params_.push_back({std::move(name), std::move(shape), RowMatrix<T>::Zero(rows, cols)});
    return static_cast<int>(params_.size()) - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }
  RowMatrix<T>& value(int i) { return params_[static_cast<std::size_t>(i)].value; }
  const RowMatrix<T>& value(int i) const { return params_[static_cast<std::size_t>(i)].value; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::int64_t scalar_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& p : out.params_) p.value.setZero();
    return out;
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : params_) {
      const int idx = out.add(p.name, p.shape, static_cast<int>(p.value.rows()),
                              static_cast<int>(p.value.cols()));
      out.value(idx) = p.value.template cast<U>();
    }
    return out;
  }

  bool operator==(const ParamSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name != other.params_[i].name) return false;
      if (params_[i].value.rows() != other.params_[i].value.rows() ||
          params_[i].value.cols() != other.params_[i].value.cols() ||
          params_[i].value != other.params_[i].value) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Parameter<T>> params_;
};

// Positions of every named parameter inside a ParamSet.
struct ParamLayout {
  struct Conv {
    int weight = -1;
    int bias = -1;
  };
  struct Head {
    Conv first;   // dilation 6
    Conv second;  // dilation 12
  };
  struct NonLocal {
    int q = -1, k = -1, v = -1;
  };

  std::vector<Conv> backbone;
  Conv classifier;
  Head sal_head, seg_head;
  NonLocal sal_nonlocal, seg_nonlocal;
  Conv fusion_first, fusion_second;
  Conv sal_pred, seg_pred;

  // Parameters touched by the classification path (backbone + classifier).
  std::vector<int> classification_params() const;
  std::vector<int> saliency_head_params() const;
};

// How the predictions are refined by affinities.
enum class AffinityMode {
  kNone,       // no non-local blocks, refined == raw
  kSegOnly,    // segmentation affinity alone
  kCrossTask,  // SA fusion of saliency and segmentation affinities
};

const char* to_string(AffinityMode mode);
AffinityMode affinity_mode_from_string(const std::string& name);

struct ForwardOptions {
  AffinityMode affinity = AffinityMode::kCrossTask;
  bool transpose_affinity = true;
  // Stop after the classifier (warm-up and CAM extraction).
  bool classifier_only = false;
};

class Model {
 public:
  // Deterministic initialization from config.seed: He-normal weights, zero
  // biases, N(0, 0.01) for the classifier, the two 1x1 predictors and the
  // non-local query/key projections.
  static Model build(const ModelConfig& config);
  // Rebuilds the layout from config and takes parameter values from `params`
  // (matched by name and shape).
  static Model from_params(const ModelConfig& config, const ParamSet<float>& params);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  ParamSet<float>& params() { return params_; }
  const ParamSet<float>& params() const { return params_; }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  ParamSet<float> params_;
};

// Allocates zero-valued parameters (names and shapes only) for a config.
template <typename T>
ParamSet<T> make_param_skeleton(const ModelConfig& config, ParamLayout& layout);

template <typename T>
struct BackboneFeatures {
  FeatureMap<T> data;
  int stride = 1;
};

template <typename T>
struct ClassifyOutput {
  RowVector<T> logits;
  RowVector<T> pooled;
};

template <typename T>
struct TaskFeatures {
  FeatureMap<T> saliency;
  FeatureMap<T> segmentation;
};

template <typename T>
struct RawPredictions {
  RowVector<T> class_logits;
  FeatureMap<T> saliency_prob;  // H x W x 1
  FeatureMap<T> seg_prob;       // H x W x (C + 1)
};

BackboneFeatures<float> forward_backbone(const Model& model, const Image& image);
ClassifyOutput<float> classify(const Model& model, const BackboneFeatures<float>& features);
TaskFeatures<float> decode_task_heads(const Model& model, const BackboneFeatures<float>& features);
// Expects the affinity-augmented features. class_logits is left empty.
RawPredictions<float> predict(const Model& model, const FeatureMap<float>& sal_features,
                              const FeatureMap<float>& seg_features);

// Full differentiable forward pass with every intermediate retained.
template <typename T>
struct NetworkTrace {
  ForwardOptions options;
  std::vector<RowMatrix<T>> backbone_cols;
  std::vector<FeatureMap<T>> backbone_out;  // post-ReLU output of every block
  RowVector<T> pooled;
  RowVector<T> logits;

  struct Head {
    RowMatrix<T> cols1, cols2;
    FeatureMap<T> out1, out2;  // out2 is the task feature fed to the affinity module
  };
  Head sal_head, seg_head;
  NonLocalOutput<T> sal_nonlocal, seg_nonlocal;
  FusionOutput<T> fusion;
  AffinityMatrix<T> cross_task;   // A_CT
  AffinityMatrix<T> aggregation;  // normalized A_CT used for refinement
  FeatureMap<T> sal_out, seg_out; // augmented task features
  FeatureMap<T> sal_prob, seg_prob;
  FeatureMap<T> ref_sal, ref_seg;

  const FeatureMap<T>& features() const { return backbone_out.back(); }
};

// Gradients of a scalar objective with respect to the network outputs.
// Empty members mean "no gradient".
template <typename T>
struct OutputGrads {
  RowVector<T> logits;
  RowMatrix<T> sal_prob, seg_prob, ref_sal, ref_seg;
};

template <typename T>
NetworkTrace<T> network_forward(const ModelConfig& config, const ParamLayout& layout,
                                const ParamSet<T>& params, const FeatureMap<T>& image,
                                const ForwardOptions& options);

// Accumulates parameter gradients into `grads`.
template <typename T>
void network_backward(const ModelConfig& config, const ParamLayout& layout,
                      const ParamSet<T>& params, const NetworkTrace<T>& trace,
                      const OutputGrads<T>& upstream, ParamSet<T>& grads);

template <typename T>
NonLocalParams<T> nonlocal_params(const ParamSet<T>& params, const ParamLayout::NonLocal& idx);
template <typename T>
SaParams<T> sa_params(const ParamSet<T>& params, const ParamLayout& layout);

}  // namespace auxseg
