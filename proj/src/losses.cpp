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

#include "auxseg/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "auxseg/errors.hpp"

namespace auxseg {
namespace {

template <typename T>
T softplus(T x) {
  // log(1 + e^x) without overflow.
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
LossValue<T> multilabel_soft_margin(const RowVector<T>& logits, const RowVector<T>& targets) {
  if (logits.size() != targets.size() || logits.size() == 0) {
    throw ShapeError("logits and targets must be non-empty and equally sized");
  }
  if (!logits.allFinite()) throw NumericError("multilabel_soft_margin: non-finite logits");
  const T n = static_cast<T>(logits.size());
  LossValue<T> out;
  out.grad.resize(1, logits.size());
  for (Eigen::Index c = 0; c < logits.size(); ++c) {
    const T x = logits(c), y = targets(c);
    if (y != T(0) && y != T(1)) throw DomainError("multilabel targets must be 0 or 1");
    out.value += y * softplus(-x) + (T(1) - y) * softplus(x);
    out.grad(0, c) = (sigmoid(x) - y) / n;
  }
  out.value /= n;
  return out;
}

template <typename T>
LossValue<T> saliency_bce(const RowMatrix<T>& pred, const LabelMask& target, T eps) {
  if (pred.cols() != 1 || pred.rows() != static_cast<Eigen::Index>(target.size())) {
    throw ShapeError("saliency prediction and target sizes differ");
  }
  LossValue<T> out;
  out.grad = RowMatrix<T>::Zero(pred.rows(), 1);
  Eigen::Index valid = 0;
  for (auto label : target.labels) {
    if (label == kIgnoreLabel) continue;
    if (label > 1) throw DomainError("saliency targets must be 0 or 1");
    ++valid;
  }
  if (valid == 0) return out;
  const T n = static_cast<T>(valid);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const std::uint8_t label = target.labels[static_cast<std::size_t>(i)];
    if (label == kIgnoreLabel) continue;
    const T raw = pred(i, 0);
    const T p = std::clamp(raw, eps, T(1) - eps);
    const bool inside = raw > eps && raw < T(1) - eps;
    if (label == 1) {
      out.value -= std::log(p);
      if (inside) out.grad(i, 0) = -T(1) / (p * n);
    } else {
      out.value -= std::log(T(1) - p);
      if (inside) out.grad(i, 0) = T(1) / ((T(1) - p) * n);
    }
  }
  out.value /= n;
  return out;
}

template <typename T>
LossValue<T> seg_cross_entropy(const RowMatrix<T>& pred, const LabelMask& target, T eps) {
  if (pred.rows() != static_cast<Eigen::Index>(target.size())) {
    throw ShapeError("segmentation prediction and target sizes differ");
  }
  const int max_label = static_cast<int>(pred.cols()) - 1;
  LossValue<T> out;
  out.grad = RowMatrix<T>::Zero(pred.rows(), pred.cols());
  Eigen::Index valid = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::uint8_t label = target.labels[i];
    if (label == kIgnoreLabel) continue;
    if (label > max_label) {
      throw DomainError(fmt::format("label {} exceeds the {} predicted classes", label, max_label + 1));
    }
    ++valid;
  }
  if (valid == 0) return out;
  const T n = static_cast<T>(valid);
  for (std::size_t i = 0; i < target.size(); ++i) {
    const std::uint8_t label = target.labels[i];
    if (label == kIgnoreLabel) continue;
    const T raw = pred(static_cast<Eigen::Index>(i), label);
    const T p = std::max(raw, eps);
    out.value -= std::log(p);
    if (raw > eps) out.grad(static_cast<Eigen::Index>(i), label) = -T(1) / (p * n);
  }
  out.value /= n;
  return out;
}

void LossWeights::validate() const {
  std::vector<std::string> problems;
  for (auto [name, v] : {std::pair{"lambda_cls", cls}, std::pair{"lambda_sal", sal},
                         std::pair{"lambda_seg", seg}}) {
    if (!std::isfinite(v) || v < 0) problems.push_back(fmt::format("loss.{}={} must be finite and >= 0", name, v));
  }
  if (problems.empty() && cls == 0 && sal == 0 && seg == 0) {
    problems.push_back("loss weights must not all be zero");
  }
  if (!problems.empty()) {
    std::string msg = "invalid loss weights:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

template <typename T>
LossResult<T> total_loss(const LossInputs<T>& in, const LossWeights& w) {
  LossResult<T> r;
  if (in.class_logits) {
    if (!in.class_targets) throw PreconditionError("classification loss needs targets");
    auto v = multilabel_soft_margin(*in.class_logits, *in.class_targets);
    r.report.l_cls = static_cast<double>(v.value);
    r.grad_logits = v.grad * static_cast<T>(w.cls);
  }
  auto sal_term = [&](const RowMatrix<T>* pred, double& slot, RowMatrix<T>& grad) {
    if (!pred) return;
    if (!in.sal_pgt) throw PreconditionError("saliency loss needs a saliency pseudo label");
    auto v = saliency_bce(*pred, *in.sal_pgt);
    slot = static_cast<double>(v.value);
    grad = v.grad * static_cast<T>(w.sal);
  };
  auto seg_term = [&](const RowMatrix<T>* pred, double& slot, RowMatrix<T>& grad) {
    if (!pred) return;
    if (!in.seg_pgt) throw PreconditionError("segmentation loss needs a segmentation pseudo label");
    auto v = seg_cross_entropy(*pred, *in.seg_pgt);
    slot = static_cast<double>(v.value);
    grad = v.grad * static_cast<T>(w.seg);
  };
  sal_term(in.sal_prob, r.report.l_sal1, r.grad_sal);
  sal_term(in.ref_sal, r.report.l_sal2, r.grad_ref_sal);
  seg_term(in.seg_prob, r.report.l_seg1, r.grad_seg);
  seg_term(in.ref_seg, r.report.l_seg2, r.grad_ref_seg);
  r.report.total = w.cls * r.report.l_cls + w.sal * (r.report.l_sal1 + r.report.l_sal2) +
                   w.seg * (r.report.l_seg1 + r.report.l_seg2);
  return r;
}

#define AUXSEG_INSTANTIATE(T)                                                                   \
  template LossValue<T> multilabel_soft_margin(const RowVector<T>&, const RowVector<T>&);      \
  template LossValue<T> saliency_bce(const RowMatrix<T>&, const LabelMask&, T);                \
  template LossValue<T> seg_cross_entropy(const RowMatrix<T>&, const LabelMask&, T);           \
  template LossResult<T> total_loss(const LossInputs<T>&, const LossWeights&);

AUXSEG_INSTANTIATE(float)
AUXSEG_INSTANTIATE(double)
#undef AUXSEG_INSTANTIATE

}  // namespace auxseg
