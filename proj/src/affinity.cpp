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

#include "auxseg/affinity.hpp"

#include <algorithm>

#include "auxseg/errors.hpp"
#include "auxseg/nn.hpp"

namespace auxseg {

const char* to_string(AffinityNorm norm) {
  switch (norm) {
    case AffinityNorm::kRaw: return "raw";
    case AffinityNorm::kRowStochastic: return "row-stochastic";
    case AffinityNorm::kAggregation: return "aggregation-normalized";
  }
  return "raw";
}

AffinityNorm affinity_norm_from_string(const std::string& name) {
  if (name == "raw") return AffinityNorm::kRaw;
  if (name == "row-stochastic") return AffinityNorm::kRowStochastic;
  if (name == "aggregation-normalized") return AffinityNorm::kAggregation;
  throw DomainError("unknown affinity normalization '" + name + "'");
}

template <typename T>
NonLocalOutput<T> nonlocal_block(const FeatureMap<T>& features, const NonLocalParams<T>& params) {
  const int d = features.channels();
  if (params.q_proj.rows() != d || params.q_proj.cols() != d || params.k_proj.rows() != d ||
      params.k_proj.cols() != d || params.v_proj.rows() != d || params.v_proj.cols() != d) {
    throw ShapeError("non-local projections must be D x D with D = feature channels");
  }
  NonLocalOutput<T> out;
  out.query.noalias() = features.data * params.q_proj;
  out.key.noalias() = features.data * params.k_proj;
  out.value.noalias() = features.data * params.v_proj;
  if (!out.query.allFinite() || !out.key.allFinite() || !out.value.allFinite()) {
    throw NumericError("non-local block produced non-finite projections");
  }
  RowMatrix<T> scores = out.query * out.key.transpose();
  nn::softmax_rows_inplace(scores);
  out.affinity = {std::move(scores), features.height, features.width,
                  AffinityNorm::kRowStochastic};
  out.augmented = features;
  out.augmented.data.noalias() += out.affinity.data * out.value;
  return out;
}

template <typename T>
NonLocalGrad<T> nonlocal_backward(const FeatureMap<T>& features, const NonLocalParams<T>& params,
                                  const NonLocalOutput<T>& fwd,
                                  const RowMatrix<T>& grad_augmented,
                                  const RowMatrix<T>* grad_affinity) {
  const RowMatrix<T>& a = fwd.affinity.data;
  RowMatrix<T> grad_a = grad_augmented * fwd.value.transpose();
  if (grad_affinity) grad_a += *grad_affinity;
  const RowMatrix<T> grad_v = a.transpose() * grad_augmented;
  const RowMatrix<T> grad_scores = nn::softmax_rows_backward(a, grad_a);
  const RowMatrix<T> grad_q = grad_scores * fwd.key;
  const RowMatrix<T> grad_k = grad_scores.transpose() * fwd.query;

  NonLocalGrad<T> g;
  g.params.q_proj = features.data.transpose() * grad_q;
  g.params.k_proj = features.data.transpose() * grad_k;
  g.params.v_proj = features.data.transpose() * grad_v;
  g.input = grad_augmented;
  g.input.noalias() += grad_q * params.q_proj.transpose();
  g.input.noalias() += grad_k * params.k_proj.transpose();
  g.input.noalias() += grad_v * params.v_proj.transpose();
  return g;
}

template <typename T>
FusionOutput<T> fuse_affinities(const AffinityMatrix<T>& a_sal, const AffinityMatrix<T>& a_seg,
                                const SaParams<T>& sa) {
  if (a_sal.height != a_seg.height || a_sal.width != a_seg.width ||
      a_sal.data.rows() != a_seg.data.rows() || a_sal.data.cols() != a_seg.data.cols()) {
    throw ShapeError("fusion inputs must share dimensions");
  }
  if (sa.w1.rows() != 2 || sa.w2.cols() != 2 || sa.w1.cols() != sa.w2.rows()) {
    throw ShapeError("fusion SA parameters must map 2 -> hidden -> 2 channels");
  }
  const Eigen::Index n = a_sal.data.rows();
  const Eigen::Index cells = n * a_sal.data.cols();
  using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const Eigen::Map<const Col> sal(a_sal.data.data(), cells);
  const Eigen::Map<const Col> seg(a_seg.data.data(), cells);

  FusionOutput<T> out;
  out.hidden = sal * sa.w1.row(0) + seg * sa.w1.row(1);
  out.hidden.rowwise() += sa.b1.row(0);
  nn::relu_inplace(out.hidden);
  RowMatrix<T> logits = out.hidden * sa.w2;
  logits.rowwise() += sa.b2.row(0);

  out.weights.w1.resize(n, a_sal.data.cols());
  out.weights.w2.resize(n, a_sal.data.cols());
  Eigen::Map<Col> w1(out.weights.w1.data(), cells);
  Eigen::Map<Col> w2(out.weights.w2.data(), cells);
  // Two-way softmax: w1 = sigmoid(l1 - l2), w2 = 1 - w1.
  const Col diff = logits.col(0) - logits.col(1);
  w1 = (T(1) + (-diff.array()).exp()).inverse().matrix();
  w2 = (T(1) + diff.array().exp()).inverse().matrix();

  out.cross_task.height = a_sal.height;
  out.cross_task.width = a_sal.width;
  out.cross_task.normalization = a_sal.normalization == AffinityNorm::kRowStochastic &&
                                         a_seg.normalization == AffinityNorm::kRowStochastic
                                     ? AffinityNorm::kRowStochastic
                                     : AffinityNorm::kRaw;
  out.cross_task.data =
      (out.weights.w1.array() * a_sal.data.array() + out.weights.w2.array() * a_seg.data.array())
          .matrix();
  return out;
}

template <typename T>
FusionGrad<T> fuse_backward(const AffinityMatrix<T>& a_sal, const AffinityMatrix<T>& a_seg,
                            const SaParams<T>& sa, const FusionOutput<T>& fwd,
                            const RowMatrix<T>& grad_ct) {
  using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  const Eigen::Index cells = a_sal.data.size();
  const auto& w1m = fwd.weights.w1;
  const auto& w2m = fwd.weights.w2;

  FusionGrad<T> g;
  g.a_sal = (grad_ct.array() * w1m.array()).matrix();
  g.a_seg = (grad_ct.array() * w2m.array()).matrix();

  // d(logit1) = w1 * w2 * (dw1 - dw2), d(logit2) = -d(logit1).
  const RowMatrix<T> dl1 = (w1m.array() * w2m.array() * grad_ct.array() *
                            (a_sal.data.array() - a_seg.data.array()))
                               .matrix();
  const Eigen::Map<const Col> dl1_flat(dl1.data(), cells);
  RowMatrix<T> grad_logits(cells, 2);
  grad_logits.col(0) = dl1_flat;
  grad_logits.col(1) = -dl1_flat;

  g.sa.w2 = fwd.hidden.transpose() * grad_logits;
  g.sa.b2 = grad_logits.colwise().sum();
  RowMatrix<T> grad_hidden = grad_logits * sa.w2.transpose();
  nn::relu_backward_inplace(grad_hidden, fwd.hidden);

  const Eigen::Map<const Col> sal(a_sal.data.data(), cells);
  const Eigen::Map<const Col> seg(a_seg.data.data(), cells);
  g.sa.w1.resize(2, sa.w1.cols());
  g.sa.w1.row(0) = sal.transpose() * grad_hidden;
  g.sa.w1.row(1) = seg.transpose() * grad_hidden;
  g.sa.b1 = grad_hidden.colwise().sum();

  Eigen::Map<Col> gsal(g.a_sal.data(), cells);
  Eigen::Map<Col> gseg(g.a_seg.data(), cells);
  gsal.noalias() += grad_hidden * sa.w1.row(0).transpose();
  gseg.noalias() += grad_hidden * sa.w1.row(1).transpose();
  return g;
}

namespace {
template <typename T>
constexpr T kRowSumFloor = T(1e-12);
}

template <typename T>
AffinityMatrix<T> aggregation_normalize(const AffinityMatrix<T>& a, bool transpose) {
  AffinityMatrix<T> out;
  out.height = a.height;
  out.width = a.width;
  out.normalization = AffinityNorm::kAggregation;
  if (transpose) {
    out.data = a.data.transpose();
  } else {
    out.data = a.data;
  }
  const auto sums = out.data.rowwise().sum().eval();
  for (Eigen::Index r = 0; r < out.data.rows(); ++r) {
    out.data.row(r) /= std::max(sums(r), kRowSumFloor<T>);
  }
  return out;
}

template <typename T>
RowMatrix<T> aggregation_normalize_backward(const AffinityMatrix<T>& input, bool transpose,
                                            const RowMatrix<T>& grad_out) {
  const RowMatrix<T> b = transpose ? RowMatrix<T>(input.data.transpose()) : input.data;
  RowMatrix<T> grad_b(b.rows(), b.cols());
  for (Eigen::Index r = 0; r < b.rows(); ++r) {
    const T sum = b.row(r).sum();
    if (sum > kRowSumFloor<T>) {
      const T dot = grad_out.row(r).dot(b.row(r));
      grad_b.row(r) = (grad_out.row(r).array() / sum - dot / (sum * sum)).matrix();
    } else {
      grad_b.row(r) = grad_out.row(r) / kRowSumFloor<T>;
    }
  }
  if (transpose) return grad_b.transpose();
  return grad_b;
}

template <typename T>
RowMatrix<T> refine_map(const RowMatrix<T>& pred, const AffinityMatrix<T>& aggregation) {
  if (pred.rows() != aggregation.data.cols()) {
    throw ShapeError("prediction pixel count does not match affinity dimensions");
  }
  return aggregation.data * pred;
}

template <typename T>
FeatureMap<T> refine_map(const FeatureMap<T>& pred, const AffinityMatrix<T>& aggregation) {
  if (pred.height != aggregation.height || pred.width != aggregation.width) {
    throw ShapeError("prediction grid does not match affinity grid");
  }
  return FeatureMap<T>(pred.height, pred.width, refine_map(pred.data, aggregation));
}

#define AUXSEG_INSTANTIATE(T)                                                                  \
  template NonLocalOutput<T> nonlocal_block(const FeatureMap<T>&, const NonLocalParams<T>&);  \
  template NonLocalGrad<T> nonlocal_backward(const FeatureMap<T>&, const NonLocalParams<T>&,  \
                                             const NonLocalOutput<T>&, const RowMatrix<T>&,   \
                                             const RowMatrix<T>*);                            \
  template FusionOutput<T> fuse_affinities(const AffinityMatrix<T>&, const AffinityMatrix<T>&, \
                                           const SaParams<T>&);                               \
  template FusionGrad<T> fuse_backward(const AffinityMatrix<T>&, const AffinityMatrix<T>&,    \
                                       const SaParams<T>&, const FusionOutput<T>&,            \
                                       const RowMatrix<T>&);                                  \
  template AffinityMatrix<T> aggregation_normalize(const AffinityMatrix<T>&, bool);           \
  template RowMatrix<T> aggregation_normalize_backward(const AffinityMatrix<T>&, bool,        \
                                                       const RowMatrix<T>&);                  \
  template RowMatrix<T> refine_map(const RowMatrix<T>&, const AffinityMatrix<T>&);            \
  template FeatureMap<T> refine_map(const FeatureMap<T>&, const AffinityMatrix<T>&);

AUXSEG_INSTANTIATE(float)
AUXSEG_INSTANTIATE(double)
#undef AUXSEG_INSTANTIATE

}  // namespace auxseg
