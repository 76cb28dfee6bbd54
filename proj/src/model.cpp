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

#include "auxseg/model.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "auxseg/errors.hpp"

namespace auxseg {
namespace {

constexpr nn::ConvGeometry kHeadFirst{3, 1, 6, 6};
constexpr nn::ConvGeometry kHeadSecond{3, 1, 12, 12};
constexpr nn::ConvGeometry kPointwise{1, 1, 1, 0};

nn::ConvGeometry backbone_geometry(const ModelConfig& config, int block) {
  return {3, block < config.downsampling_blocks() ? 2 : 1, 1, 1};
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (!is_power_of_two(stride)) problems.push_back(fmt::format("stride={} is not a power of two", stride));
  if (head_width <= 0) problems.push_back(fmt::format("head_width={} must be positive", head_width));
  if (backbone_width <= 0) {
    problems.push_back(fmt::format("backbone_width={} must be positive", backbone_width));
  }
  if (num_classes <= 0) problems.push_back(fmt::format("num_classes={} must be positive", num_classes));
  if (fusion_hidden <= 0) {
    problems.push_back(fmt::format("fusion_hidden={} must be positive", fusion_hidden));
  }
  if (num_classes + 1 > 255) problems.push_back("num_classes must leave room for the ignore label");
  if (backbone_depth < 1 ||
      (is_power_of_two(stride) && backbone_depth < static_cast<int>(std::log2(stride)))) {
    problems.push_back(fmt::format("backbone_depth={} too small for stride {}", backbone_depth, stride));
  }
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += "\n  model." + p;
    throw ConfigError(msg);
  }
}

int ModelConfig::downsampling_blocks() const {
  int n = 0;
  for (int s = stride; s > 1; s >>= 1) ++n;
  return n;
}

std::int64_t ModelConfig::parameter_count() const {
  const std::int64_t k = backbone_width, d = head_width, c = num_classes, h = fusion_hidden;
  std::int64_t n = (27 * k + k) + (backbone_depth - 1) * (9 * k * k + k);
  n += k * c + c;
  n += 2 * ((9 * k * d + d) + (9 * d * d + d));
  n += 2 * 3 * d * d;
  n += 2 * h + h + 2 * h + 2;
  n += d + 1;
  n += d * (c + 1) + (c + 1);
  return n;
}

std::vector<int> ParamLayout::classification_params() const {
  std::vector<int> out;
  for (const auto& b : backbone) {
    out.push_back(b.weight);
    out.push_back(b.bias);
  }
  out.push_back(classifier.weight);
  out.push_back(classifier.bias);
  return out;
}

std::vector<int> ParamLayout::saliency_head_params() const {
  return {sal_head.first.weight,  sal_head.first.bias,  sal_head.second.weight,
          sal_head.second.bias,   sal_nonlocal.q,       sal_nonlocal.k,
          sal_nonlocal.v,         sal_pred.weight,      sal_pred.bias};
}

const char* to_string(AffinityMode mode) {
  switch (mode) {
    case AffinityMode::kNone: return "none";
    case AffinityMode::kSegOnly: return "seg";
    case AffinityMode::kCrossTask: return "cross-task";
  }
  return "none";
}

AffinityMode affinity_mode_from_string(const std::string& name) {
  if (name == "none") return AffinityMode::kNone;
  if (name == "seg") return AffinityMode::kSegOnly;
  if (name == "cross-task") return AffinityMode::kCrossTask;
  throw ConfigError("unknown affinity mode '" + name + "' (expected none, seg, cross-task)");
}

template <typename T>
ParamSet<T> make_param_skeleton(const ModelConfig& config, ParamLayout& layout) {
  ParamSet<T> p;
  auto conv = [&](const std::string& prefix, int k, int cin, int cout) {
    ParamLayout::Conv c;
    c.weight = p.add(prefix + ".weight", {k, k, cin, cout}, k * k * cin, cout);
    c.bias = p.add(prefix + ".bias", {cout}, 1, cout);
    return c;
  };
  const int k = config.backbone_width, d = config.head_width, c = config.num_classes;
  layout = ParamLayout{};
  for (int b = 0; b < config.backbone_depth; ++b) {
    layout.backbone.push_back(conv(fmt::format("backbone.{}", b), 3, b == 0 ? 3 : k, k));
  }
  layout.classifier.weight = p.add("classifier.weight", {k, c}, k, c);
  layout.classifier.bias = p.add("classifier.bias", {c}, 1, c);
  for (auto [head, name] : {std::pair{&layout.sal_head, "sal_head"},
                            std::pair{&layout.seg_head, "seg_head"}}) {
    head->first = conv(fmt::format("{}.0", name), 3, k, d);
    head->second = conv(fmt::format("{}.1", name), 3, d, d);
  }
  for (auto [nl, name] : {std::pair{&layout.sal_nonlocal, "sal_nonlocal"},
                          std::pair{&layout.seg_nonlocal, "seg_nonlocal"}}) {
    nl->q = p.add(fmt::format("{}.query", name), {d, d}, d, d);
    nl->k = p.add(fmt::format("{}.key", name), {d, d}, d, d);
    nl->v = p.add(fmt::format("{}.value", name), {d, d}, d, d);
  }
  layout.fusion_first = conv("fusion.0", 1, 2, config.fusion_hidden);
  layout.fusion_second = conv("fusion.1", 1, config.fusion_hidden, 2);
  layout.sal_pred = conv("sal_pred", 1, d, 1);
  layout.seg_pred = conv("seg_pred", 1, d, c + 1);
  return p;
}

Model Model::build(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  m.params_ = make_param_skeleton<float>(config, m.layout_);
  std::mt19937_64 rng(config.seed);
  for (std::size_t i = 0; i < m.params_.size(); ++i) {
    auto& p = m.params_[i];
    if (p.name.ends_with(".bias")) continue;
    double stddev = std::sqrt(2.0 / static_cast<double>(p.value.rows()));
    // Output layers start near-uniform: classifier and both predictors.
    const int idx = static_cast<int>(i);
    if (idx == m.layout_.classifier.weight || idx == m.layout_.sal_pred.weight ||
        idx == m.layout_.seg_pred.weight) {
      stddev = 0.01;
    }
    // Query/key start small so the first affinities are near-uniform; He-scaled
    // projections of warm-up features give dot products in the hundreds and a
    // saturated softmax.
    if (p.name.ends_with(".query") || p.name.ends_with(".key")) stddev = 0.01;
    std::normal_distribution<double> dist(0.0, stddev);
    for (Eigen::Index j = 0; j < p.value.size(); ++j) {
      p.value.data()[j] = static_cast<float>(dist(rng));
    }
  }
  return m;
}

Model Model::from_params(const ModelConfig& config, const ParamSet<float>& params) {
  config.validate();
  Model m;
  m.config_ = config;
  m.params_ = make_param_skeleton<float>(config, m.layout_);
  for (auto& p : m.params_) {
    const int src = params.index_of(p.name);
    if (src < 0) throw ValidationError("checkpoint is missing parameter '" + p.name + "'");
    const auto& v = params.value(src);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw ValidationError("checkpoint parameter '" + p.name + "' has the wrong shape");
    }
    p.value = v;
  }
  return m;
}

template <typename T>
NonLocalParams<T> nonlocal_params(const ParamSet<T>& params, const ParamLayout::NonLocal& idx) {
  return {params.value(idx.q), params.value(idx.k), params.value(idx.v)};
}

template <typename T>
SaParams<T> sa_params(const ParamSet<T>& params, const ParamLayout& layout) {
  return {params.value(layout.fusion_first.weight), params.value(layout.fusion_first.bias),
          params.value(layout.fusion_second.weight), params.value(layout.fusion_second.bias)};
}

namespace {

template <typename T>
void check_image(const ModelConfig& config, const FeatureMap<T>& image) {
  if (image.channels() != 3) throw ShapeError("image must have 3 channels");
  if (image.height % config.stride != 0 || image.width % config.stride != 0) {
    throw ShapeError(fmt::format("image {}x{} is not divisible by stride {}", image.height,
                                 image.width, config.stride));
  }
}

template <typename T>
void backbone_forward(const ModelConfig& config, const ParamLayout& layout,
                      const ParamSet<T>& params, const FeatureMap<T>& image,
                      NetworkTrace<T>& trace) {
  check_image(config, image);
  const FeatureMap<T>* in = &image;
  trace.backbone_cols.resize(layout.backbone.size());
  trace.backbone_out.resize(layout.backbone.size());
  for (std::size_t b = 0; b < layout.backbone.size(); ++b) {
    const auto g = backbone_geometry(config, static_cast<int>(b));
    trace.backbone_out[b] = nn::conv_forward(*in, params.value(layout.backbone[b].weight),
                                             params.value(layout.backbone[b].bias), g,
                                             &trace.backbone_cols[b]);
    nn::relu_inplace(trace.backbone_out[b].data);
    in = &trace.backbone_out[b];
  }
}

template <typename T>
void classify_forward(const ParamLayout& layout, const ParamSet<T>& params,
                      const FeatureMap<T>& features, RowVector<T>& pooled, RowVector<T>& logits) {
  pooled = features.data.colwise().mean();
  logits = pooled * params.value(layout.classifier.weight) + params.value(layout.classifier.bias);
}

template <typename T>
void head_forward(const ParamLayout::Head& head, const ParamSet<T>& params,
                  const FeatureMap<T>& features, typename NetworkTrace<T>::Head& out) {
  out.out1 = nn::conv_forward(features, params.value(head.first.weight),
                              params.value(head.first.bias), kHeadFirst, &out.cols1);
  nn::relu_inplace(out.out1.data);
  out.out2 = nn::conv_forward(out.out1, params.value(head.second.weight),
                              params.value(head.second.bias), kHeadSecond, &out.cols2);
  nn::relu_inplace(out.out2.data);
}

template <typename T>
void predict_forward(const ParamLayout& layout, const ParamSet<T>& params,
                     const FeatureMap<T>& sal_out, const FeatureMap<T>& seg_out,
                     FeatureMap<T>& sal_prob, FeatureMap<T>& seg_prob) {
  sal_prob = nn::conv_forward(sal_out, params.value(layout.sal_pred.weight),
                              params.value(layout.sal_pred.bias), kPointwise);
  sal_prob.data = (T(1) + (-sal_prob.data.array()).exp()).inverse().matrix();
  seg_prob = nn::conv_forward(seg_out, params.value(layout.seg_pred.weight),
                              params.value(layout.seg_pred.bias), kPointwise);
  nn::softmax_rows_inplace(seg_prob.data);
}

}  // namespace

BackboneFeatures<float> forward_backbone(const Model& model, const Image& image) {
  NetworkTrace<float> trace;
  backbone_forward(model.config(), model.layout(), model.params(), image, trace);
  return {std::move(trace.backbone_out.back()), model.config().stride};
}

ClassifyOutput<float> classify(const Model& model, const BackboneFeatures<float>& features) {
  if (features.data.channels() != model.config().backbone_width) {
    throw ShapeError("feature channels do not match the classifier");
  }
  ClassifyOutput<float> out;
  classify_forward(model.layout(), model.params(), features.data, out.pooled, out.logits);
  return out;
}

TaskFeatures<float> decode_task_heads(const Model& model,
                                      const BackboneFeatures<float>& features) {
  NetworkTrace<float>::Head sal, seg;
  head_forward(model.layout().sal_head, model.params(), features.data, sal);
  head_forward(model.layout().seg_head, model.params(), features.data, seg);
  return {std::move(sal.out2), std::move(seg.out2)};
}

RawPredictions<float> predict(const Model& model, const FeatureMap<float>& sal_features,
                              const FeatureMap<float>& seg_features) {
  RawPredictions<float> out;
  predict_forward(model.layout(), model.params(), sal_features, seg_features, out.saliency_prob,
                  out.seg_prob);
  return out;
}

template <typename T>
NetworkTrace<T> network_forward(const ModelConfig& config, const ParamLayout& layout,
                                const ParamSet<T>& params, const FeatureMap<T>& image,
                                const ForwardOptions& options) {
  NetworkTrace<T> t;
  t.options = options;
  backbone_forward(config, layout, params, image, t);
  classify_forward(layout, params, t.features(), t.pooled, t.logits);
  if (options.classifier_only) return t;

  head_forward(layout.sal_head, params, t.features(), t.sal_head);
  head_forward(layout.seg_head, params, t.features(), t.seg_head);
  const int fh = t.features().height, fw = t.features().width;

  switch (options.affinity) {
    case AffinityMode::kNone:
      t.sal_out = t.sal_head.out2;
      t.seg_out = t.seg_head.out2;
      break;
    case AffinityMode::kSegOnly:
      t.sal_out = t.sal_head.out2;
      t.seg_nonlocal = nonlocal_block(t.seg_head.out2, nonlocal_params(params, layout.seg_nonlocal));
      t.seg_out = t.seg_nonlocal.augmented;
      t.cross_task = t.seg_nonlocal.affinity;
      break;
    case AffinityMode::kCrossTask:
      t.sal_nonlocal = nonlocal_block(t.sal_head.out2, nonlocal_params(params, layout.sal_nonlocal));
      t.seg_nonlocal = nonlocal_block(t.seg_head.out2, nonlocal_params(params, layout.seg_nonlocal));
      t.sal_out = t.sal_nonlocal.augmented;
      t.seg_out = t.seg_nonlocal.augmented;
      t.fusion = fuse_affinities(t.sal_nonlocal.affinity, t.seg_nonlocal.affinity,
                                 sa_params(params, layout));
      t.cross_task = t.fusion.cross_task;
      break;
  }

  predict_forward(layout, params, t.sal_out, t.seg_out, t.sal_prob, t.seg_prob);
  if (options.affinity == AffinityMode::kNone) {
    t.aggregation = AffinityMatrix<T>::identity(fh, fw);
    t.ref_sal = t.sal_prob;
    t.ref_seg = t.seg_prob;
  } else {
    t.aggregation = aggregation_normalize(t.cross_task, options.transpose_affinity);
    t.ref_sal = refine_map(t.sal_prob, t.aggregation);
    t.ref_seg = refine_map(t.seg_prob, t.aggregation);
  }
  return t;
}

namespace {

template <typename T>
RowMatrix<T> head_backward(const ParamLayout::Head& head, const ParamSet<T>& params,
                           const typename NetworkTrace<T>::Head& trace, const FeatureMap<T>& input,
                           RowMatrix<T> grad_out2, ParamSet<T>& grads) {
  nn::relu_backward_inplace(grad_out2, trace.out2.data);
  FeatureMap<T> g2(trace.out2.height, trace.out2.width, std::move(grad_out2));
  FeatureMap<T> g1 = nn::conv_backward(g2, trace.cols2, params.value(head.second.weight),
                                       kHeadSecond, trace.out1.height, trace.out1.width,
                                       grads.value(head.second.weight),
                                       grads.value(head.second.bias));
  nn::relu_backward_inplace(g1.data, trace.out1.data);
  FeatureMap<T> g0 = nn::conv_backward(g1, trace.cols1, params.value(head.first.weight),
                                       kHeadFirst, input.height, input.width,
                                       grads.value(head.first.weight),
                                       grads.value(head.first.bias));
  return std::move(g0.data);
}

template <typename T>
void add_nonlocal_grads(const ParamLayout::NonLocal& idx, const NonLocalGrad<T>& g,
                        ParamSet<T>& grads) {
  grads.value(idx.q) += g.params.q_proj;
  grads.value(idx.k) += g.params.k_proj;
  grads.value(idx.v) += g.params.v_proj;
}

}  // namespace

template <typename T>
void network_backward(const ModelConfig& config, const ParamLayout& layout,
                      const ParamSet<T>& params, const NetworkTrace<T>& t,
                      const OutputGrads<T>& up, ParamSet<T>& grads) {
  const FeatureMap<T>& features = t.features();
  RowMatrix<T> grad_features = RowMatrix<T>::Zero(features.data.rows(), features.data.cols());

  if (up.logits.size() > 0) {
    grads.value(layout.classifier.weight).noalias() += t.pooled.transpose() * up.logits;
    grads.value(layout.classifier.bias) += up.logits;
    const RowVector<T> grad_pooled = up.logits * params.value(layout.classifier.weight).transpose();
    grad_features.rowwise() += grad_pooled / static_cast<T>(features.pixels());
  }

  if (!t.options.classifier_only) {
    const Eigen::Index n = t.sal_prob.data.rows();
    RowMatrix<T> g_sal = up.sal_prob.size() ? up.sal_prob : RowMatrix<T>::Zero(n, 1);
    RowMatrix<T> g_seg =
        up.seg_prob.size() ? up.seg_prob : RowMatrix<T>::Zero(n, t.seg_prob.data.cols());
    RowMatrix<T> g_aggregation;
    const bool refined = t.options.affinity != AffinityMode::kNone;
    if (refined && (up.ref_sal.size() || up.ref_seg.size())) {
      g_aggregation = RowMatrix<T>::Zero(n, n);
      if (up.ref_sal.size()) {
        g_sal.noalias() += t.aggregation.data.transpose() * up.ref_sal;
        g_aggregation.noalias() += up.ref_sal * t.sal_prob.data.transpose();
      }
      if (up.ref_seg.size()) {
        g_seg.noalias() += t.aggregation.data.transpose() * up.ref_seg;
        g_aggregation.noalias() += up.ref_seg * t.seg_prob.data.transpose();
      }
    } else if (!refined) {
      if (up.ref_sal.size()) g_sal += up.ref_sal;
      if (up.ref_seg.size()) g_seg += up.ref_seg;
    }

    // Sigmoid and softmax heads, then the 1x1 predictors.
    const auto& ps = t.sal_prob.data;
    RowMatrix<T> g_sal_logit = (g_sal.array() * ps.array() * (T(1) - ps.array())).matrix();
    RowMatrix<T> g_seg_logit = nn::softmax_rows_backward(t.seg_prob.data, g_seg);
    grads.value(layout.sal_pred.weight).noalias() += t.sal_out.data.transpose() * g_sal_logit;
    grads.value(layout.sal_pred.bias) += g_sal_logit.colwise().sum();
    grads.value(layout.seg_pred.weight).noalias() += t.seg_out.data.transpose() * g_seg_logit;
    grads.value(layout.seg_pred.bias) += g_seg_logit.colwise().sum();
    RowMatrix<T> g_sal_out = g_sal_logit * params.value(layout.sal_pred.weight).transpose();
    RowMatrix<T> g_seg_out = g_seg_logit * params.value(layout.seg_pred.weight).transpose();

    RowMatrix<T> g_a_sal, g_a_seg;
    if (g_aggregation.size()) {
      const RowMatrix<T> g_ct =
          aggregation_normalize_backward(t.cross_task, t.options.transpose_affinity, g_aggregation);
      if (t.options.affinity == AffinityMode::kCrossTask) {
        FusionGrad<T> fg = fuse_backward(t.sal_nonlocal.affinity, t.seg_nonlocal.affinity,
                                         sa_params(params, layout), t.fusion, g_ct);
        grads.value(layout.fusion_first.weight) += fg.sa.w1;
        grads.value(layout.fusion_first.bias) += fg.sa.b1;
        grads.value(layout.fusion_second.weight) += fg.sa.w2;
        grads.value(layout.fusion_second.bias) += fg.sa.b2;
        g_a_sal = std::move(fg.a_sal);
        g_a_seg = std::move(fg.a_seg);
      } else {
        g_a_seg = g_ct;
      }
    }

    RowMatrix<T> g_sal_in, g_seg_in;
    if (t.options.affinity == AffinityMode::kCrossTask) {
      auto gs = nonlocal_backward(t.sal_head.out2, nonlocal_params(params, layout.sal_nonlocal),
                                  t.sal_nonlocal, g_sal_out, g_a_sal.size() ? &g_a_sal : nullptr);
      add_nonlocal_grads(layout.sal_nonlocal, gs, grads);
      g_sal_in = std::move(gs.input);
    } else {
      g_sal_in = std::move(g_sal_out);
    }
    if (t.options.affinity != AffinityMode::kNone) {
      auto gs = nonlocal_backward(t.seg_head.out2, nonlocal_params(params, layout.seg_nonlocal),
                                  t.seg_nonlocal, g_seg_out, g_a_seg.size() ? &g_a_seg : nullptr);
      add_nonlocal_grads(layout.seg_nonlocal, gs, grads);
      g_seg_in = std::move(gs.input);
    } else {
      g_seg_in = std::move(g_seg_out);
    }

    grad_features += head_backward(layout.sal_head, params, t.sal_head, features,
                                   std::move(g_sal_in), grads);
    grad_features += head_backward(layout.seg_head, params, t.seg_head, features,
                                   std::move(g_seg_in), grads);
  }

  // Backbone, last block first. The image gradient is never needed.
  for (int b = static_cast<int>(layout.backbone.size()) - 1; b >= 0; --b) {
    const FeatureMap<T>& out = t.backbone_out[b];
    nn::relu_backward_inplace(grad_features, out.data);
    if (b == 0) {
      auto& gw = grads.value(layout.backbone[0].weight);
      gw.noalias() += t.backbone_cols[0].transpose() * grad_features;
      grads.value(layout.backbone[0].bias) += grad_features.colwise().sum();
      break;
    }
    const FeatureMap<T>& in = t.backbone_out[b - 1];
    FeatureMap<T> g(out.height, out.width, std::move(grad_features));
    FeatureMap<T> gin = nn::conv_backward(g, t.backbone_cols[b], params.value(layout.backbone[b].weight),
                                          backbone_geometry(config, b), in.height, in.width,
                                          grads.value(layout.backbone[b].weight),
                                          grads.value(layout.backbone[b].bias));
    grad_features = std::move(gin.data);
  }
}

#define AUXSEG_INSTANTIATE(T)                                                                    \
  template ParamSet<T> make_param_skeleton(const ModelConfig&, ParamLayout&);                  \
  template NonLocalParams<T> nonlocal_params(const ParamSet<T>&, const ParamLayout::NonLocal&); \
  template SaParams<T> sa_params(const ParamSet<T>&, const ParamLayout&);                       \
  template NetworkTrace<T> network_forward(const ModelConfig&, const ParamLayout&,              \
                                           const ParamSet<T>&, const FeatureMap<T>&,            \
                                           const ForwardOptions&);                              \
  template void network_backward(const ModelConfig&, const ParamLayout&, const ParamSet<T>&,    \
                                 const NetworkTrace<T>&, const OutputGrads<T>&, ParamSet<T>&);

AUXSEG_INSTANTIATE(float)
AUXSEG_INSTANTIATE(double)
#undef AUXSEG_INSTANTIATE

}  // namespace auxseg
