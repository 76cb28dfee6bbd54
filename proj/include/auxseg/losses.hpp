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

inline constexpr double kProbabilityClamp = 1e-7;

// A scalar loss and its gradient with respect to the prediction argument.
template <typename T>
struct LossValue {
  T value = T(0);
  RowMatrix<T> grad;
};

// mean_c [ -y log sigmoid(x) - (1 - y) log(1 - sigmoid(x)) ], evaluated via
// softplus so large |x| never overflows.
template <typename T>
LossValue<T> multilabel_soft_margin(const RowVector<T>& logits, const RowVector<T>& targets);

// Mean binary cross entropy of an (N x 1) probability map against a 0/1
// mask, probabilities clamped to [eps, 1 - eps]. Ignore pixels (crop padding)
// are skipped.
template <typename T>
LossValue<T> saliency_bce(const RowMatrix<T>& pred, const LabelMask& target,
                          T eps = T(kProbabilityClamp));

// Mean of -log p[label] over non-ignore pixels of an (N x (C+1)) map; zero
// (with zero gradient) when every pixel is ignored.
template <typename T>
LossValue<T> seg_cross_entropy(const RowMatrix<T>& pred, const LabelMask& target,
                               T eps = T(kProbabilityClamp));

struct LossWeights {
  double cls = 1.0;
  double sal = 1.0;
  double seg = 1.0;

  void validate() const;
};

struct LossReport {
  double l_cls = 0, l_sal1 = 0, l_sal2 = 0, l_seg1 = 0, l_seg2 = 0, total = 0;
};

// Null prediction pointers disable that term (reported as 0).
template <typename T>
struct LossInputs {
  const RowVector<T>* class_logits = nullptr;
  const RowVector<T>* class_targets = nullptr;
  const RowMatrix<T>* sal_prob = nullptr;
  const RowMatrix<T>* ref_sal = nullptr;
  const RowMatrix<T>* seg_prob = nullptr;
  const RowMatrix<T>* ref_seg = nullptr;
  const LabelMask* sal_pgt = nullptr;
  const LabelMask* seg_pgt = nullptr;
};

template <typename T>
struct LossResult {
  LossReport report;
  // Weighted gradients of report.total; empty when the term is disabled.
  RowVector<T> grad_logits;
  RowMatrix<T> grad_sal, grad_ref_sal, grad_seg, grad_ref_seg;
};

// total = cls * l_cls + sal * (l_sal1 + l_sal2) + seg * (l_seg1 + l_seg2)
template <typename T>
LossResult<T> total_loss(const LossInputs<T>& inputs, const LossWeights& weights);

}  // namespace auxseg
