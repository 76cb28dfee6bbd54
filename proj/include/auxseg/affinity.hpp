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

#include <string>
#include <utility>

#include "auxseg/tensor.hpp"

// Cross-task affinity learning: task-specific non-local blocks, the
// self-attention fusion of their affinities, and affinity-based propagation
// of dense maps.
namespace auxseg {

enum class AffinityNorm {
  kRaw,            // no normalization guarantee
  kRowStochastic,  // softmax output: every row sums to 1
  kAggregation,    // rows sum to 1 and are used as aggregation weights
};

const char* to_string(AffinityNorm norm);
AffinityNorm affinity_norm_from_string(const std::string& name);

// (H*W) x (H*W) pairwise affinity over an H x W grid, row-major flattening.
template <typename T>
struct AffinityMatrix {
  RowMatrix<T> data;
  int height = 0;
  int width = 0;
  AffinityNorm normalization = AffinityNorm::kRaw;

  int size() const { return height * width; }

  static AffinityMatrix identity(int h, int w) {
    return {RowMatrix<T>::Identity(h * w, h * w), h, w, AffinityNorm::kAggregation};
  }
  static AffinityMatrix uniform(int h, int w) {
    return {RowMatrix<T>::Constant(h * w, h * w, T(1) / T(h * w)), h, w,
            AffinityNorm::kAggregation};
  }

  template <typename U>
  AffinityMatrix<U> cast() const {
    return {data.template cast<U>(), height, width, normalization};
  }
};

// 1x1 projections D -> D producing query, key and value.
template <typename T>
struct NonLocalParams {
  RowMatrix<T> q_proj;
  RowMatrix<T> k_proj;
  RowMatrix<T> v_proj;

  int channels() const { return static_cast<int>(q_proj.rows()); }
};

template <typename T>
struct NonLocalOutput {
  FeatureMap<T> augmented;
  AffinityMatrix<T> affinity;
  RowMatrix<T> query;
  RowMatrix<T> key;
  RowMatrix<T> value;
};

// affinity = rowSoftmax(Q K^T) with raw dot products (no temperature);
// augmented = features + affinity * V.
template <typename T>
NonLocalOutput<T> nonlocal_block(const FeatureMap<T>& features, const NonLocalParams<T>& params);

template <typename T>
struct NonLocalGrad {
  RowMatrix<T> input;  // (H*W) x D
  NonLocalParams<T> params;
};

// grad_affinity may be null when the affinity feeds nothing downstream.
template <typename T>
NonLocalGrad<T> nonlocal_backward(const FeatureMap<T>& features, const NonLocalParams<T>& params,
                                  const NonLocalOutput<T>& forward,
                                  const RowMatrix<T>& grad_augmented,
                                  const RowMatrix<T>* grad_affinity);

// Reference implementation with explicit loops in double precision; shares
// no code with nonlocal_block.
std::pair<FeatureMap<double>, AffinityMatrix<double>> nonlocal_oracle(
    const FeatureMap<double>& features, const NonLocalParams<double>& params);

// Self-attention fusion: two 1x1 convs (2 -> hidden -> 2, ReLU between)
// over the stacked affinities, then a softmax across the two channels.
template <typename T>
struct SaParams {
  RowMatrix<T> w1;  // 2 x hidden
  RowMatrix<T> b1;  // 1 x hidden
  RowMatrix<T> w2;  // hidden x 2
  RowMatrix<T> b2;  // 1 x 2
};

template <typename T>
struct FusionWeights {
  RowMatrix<T> w1;
  RowMatrix<T> w2;
};

template <typename T>
struct FusionOutput {
  AffinityMatrix<T> cross_task;
  FusionWeights<T> weights;
  RowMatrix<T> hidden;  // (N*N) x hidden, post-ReLU
};

template <typename T>
FusionOutput<T> fuse_affinities(const AffinityMatrix<T>& a_sal, const AffinityMatrix<T>& a_seg,
                                const SaParams<T>& sa);

template <typename T>
struct FusionGrad {
  RowMatrix<T> a_sal;
  RowMatrix<T> a_seg;
  SaParams<T> sa;
};

template <typename T>
FusionGrad<T> fuse_backward(const AffinityMatrix<T>& a_sal, const AffinityMatrix<T>& a_seg,
                            const SaParams<T>& sa, const FusionOutput<T>& forward,
                            const RowMatrix<T>& grad_cross_task);

// Optionally transposes, then rescales every row to sum to one so each output
// pixel aggregates a convex combination of inputs.
template <typename T>
AffinityMatrix<T> aggregation_normalize(const AffinityMatrix<T>& a, bool transpose);

template <typename T>
RowMatrix<T> aggregation_normalize_backward(const AffinityMatrix<T>& input, bool transpose,
                                            const RowMatrix<T>& grad_output);

// P_ref = A * P for a (H*W) x channels prediction.
template <typename T>
RowMatrix<T> refine_map(const RowMatrix<T>& pred, const AffinityMatrix<T>& aggregation);

template <typename T>
FeatureMap<T> refine_map(const FeatureMap<T>& pred, const AffinityMatrix<T>& aggregation);

}  // namespace auxseg
