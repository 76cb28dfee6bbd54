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

#include "auxseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/crf.hpp"
#include "auxseg/errors.hpp"
#include "auxseg/image_io.hpp"
#include "auxseg/log.hpp"
#include "auxseg/nn.hpp"
#include "auxseg/optim.hpp"
#include "auxseg/pseudo_labels.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint32_t kWarmupStream = 0xffff;

std::mt19937_64 stage_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  return std::mt19937_64(seq);
}

// ---- augmentation ----

struct Example {
  Image image;
  LabelMask seg;
  LabelMask sal;
};

void flip_horizontal(Image& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < img.channels(); ++c) std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

void flip_horizontal(LabelMask& m) {
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width / 2; ++x) std::swap(m.at(y, x), m.at(y, m.width - 1 - x));
}

// Crops (or zero/ignore-pads) to crop x crop with offsets (oy, ox), which
// may be negative for padding.
Image crop_image(const Image& img, int crop, int oy, int ox) {
  Image out(crop, crop, img.channels());
  for (int y = 0; y < crop; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= img.height) continue;
    for (int x = 0; x < crop; ++x) {
      const int sx = x + ox;
      if (sx < 0 || sx >= img.width) continue;
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

LabelMask crop_mask(const LabelMask& m, int crop, int oy, int ox) {
  LabelMask out(crop, crop, kIgnoreLabel);
  for (int y = 0; y < crop; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= m.height) continue;
    for (int x = 0; x < crop; ++x) {
      const int sx = x + ox;
      if (sx >= 0 && sx < m.width) out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

// Random offset along one axis: a crop window inside a larger image, or a
// centered-at-random placement of a smaller image inside the crop.
int crop_offset(int size, int crop, std::mt19937_64& rng) {
  if (size == crop) return 0;
  if (size > crop) return std::uniform_int_distribution<int>(0, size - crop)(rng);
  return -std::uniform_int_distribution<int>(0, crop - size)(rng);
}

// Flip, color jitter and crop applied jointly to the image and any masks.
Example augment(const Image& image, const LabelMask* seg, const LabelMask* sal,
                const RunConfig& config, std::mt19937_64& rng) {
  Example ex{image, seg ? *seg : LabelMask{}, sal ? *sal : LabelMask{}};
  if (config.augment.flip && std::bernoulli_distribution(0.5)(rng)) {
    flip_horizontal(ex.image);
    if (seg) flip_horizontal(ex.seg);
    if (sal) flip_horizontal(ex.sal);
  }
  if (config.augment.color_jitter > 0) {
    const double j = config.augment.color_jitter;
    std::uniform_real_distribution<double> factor(1.0 - j, 1.0 + j);
    const float brightness = static_cast<float>(factor(rng));
    const float contrast = static_cast<float>(factor(rng));
    const float mean = ex.image.data.mean();
    ex.image.data = (((ex.image.data.array() - mean) * contrast + mean) * brightness)
                        .cwiseMax(0.0f)
                        .cwiseMin(1.0f)
                        .matrix();
  }
  const int crop = config.crop;
  if (ex.image.height != crop || ex.image.width != crop) {
    const int oy = crop_offset(ex.image.height, crop, rng);
    const int ox = crop_offset(ex.image.width, crop, rng);
    ex.image = crop_image(ex.image, crop, oy, ox);
    if (seg) ex.seg = crop_mask(ex.seg, crop, oy, ox);
    if (sal) ex.sal = crop_mask(ex.sal, crop, oy, ox);
  }
  return ex;
}

FeatureMap<float> to_map(int h, int w, const RowMatrix<float>& m) { return FeatureMap<float>(h, w, m); }

RowMatrix<float> downsample_grad(const RowMatrix<float>& grad, int h, int w, int fh, int fw) {
  if (grad.size() == 0) return {};
  return nn::resize_bilinear_backward(to_map(h, w, grad), fh, fw).data;
}

void add_report(LossReport& acc, const LossReport& r) {
  acc.l_cls += r.l_cls;
  acc.l_sal1 += r.l_sal1;
  acc.l_sal2 += r.l_sal2;
  acc.l_seg1 += r.l_seg1;
  acc.l_seg2 += r.l_seg2;
  acc.total += r.total;
}

void scale_report(LossReport& r, double s) {
  r.l_cls *= s;
  r.l_sal1 *= s;
  r.l_sal2 *= s;
  r.l_seg1 *= s;
  r.l_seg2 *= s;
  r.total *= s;
}

// One image's forward/backward for a joint-training step. Returns the loss.
LossReport joint_step(const Model& model, const RunConfig& config, const Example& ex,
                      const std::vector<int>& labels, ParamSet<float>& grads) {
  const ModelConfig& mc = model.config();
  const auto trace = network_forward<float>(mc, model.layout(), model.params(),
                                            network_input(ex.image), config.forward_options());
  const int h = ex.image.height, w = ex.image.width;
  const int fh = trace.sal_prob.height, fw = trace.sal_prob.width;
  const bool refined = config.affinity != AffinityMode::kNone;

  const RowVector<float> targets = label_vector(labels, mc.num_classes);
  const auto sal_up = nn::resize_bilinear(trace.sal_prob, h, w);
  const auto seg_up = nn::resize_bilinear(trace.seg_prob, h, w);
  FeatureMap<float> ref_sal_up, ref_seg_up;

  LossInputs<float> in;
  in.class_logits = &trace.logits;
  in.class_targets = &targets;
  in.sal_prob = &sal_up.data;
  in.seg_prob = &seg_up.data;
  in.sal_pgt = &ex.sal;
  in.seg_pgt = &ex.seg;
  if (refined && config.sal_refine_loss) {
    ref_sal_up = nn::resize_bilinear(trace.ref_sal, h, w);
    in.ref_sal = &ref_sal_up.data;
  }
  if (refined && config.seg_refine_loss) {
    ref_seg_up = nn::resize_bilinear(trace.ref_seg, h, w);
    in.ref_seg = &ref_seg_up.data;
  }
  const LossResult<float> loss = total_loss(in, config.loss);

  OutputGrads<float> up;
  up.logits = loss.grad_logits;
  up.sal_prob = downsample_grad(loss.grad_sal, h, w, fh, fw);
  up.seg_prob = downsample_grad(loss.grad_seg, h, w, fh, fw);
  up.ref_sal = downsample_grad(loss.grad_ref_sal, h, w, fh, fw);
  up.ref_seg = downsample_grad(loss.grad_ref_seg, h, w, fh, fw);
  network_backward<float>(mc, model.layout(), model.params(), trace, up, grads);
  return loss.report;
}

LossReport warmup_step(const Model& model, const Example& ex, const std::vector<int>& labels,
                       ParamSet<float>& grads) {
  const ModelConfig& mc = model.config();
  ForwardOptions opts;
  opts.classifier_only = true;
  const auto trace =
      network_forward<float>(mc, model.layout(), model.params(), network_input(ex.image), opts);
  const RowVector<float> targets = label_vector(labels, mc.num_classes);
  const auto loss = multilabel_soft_margin<float>(trace.logits, targets);
  OutputGrads<float> up;
  up.logits = loss.grad;
  network_backward<float>(mc, model.layout(), model.params(), trace, up, grads);
  LossReport r;
  r.l_cls = loss.value;
  r.total = loss.value;
  return r;
}

enum class Phase { kWarmup, kJoint };

// Shared epoch/batch loop for both phases.
Model train_loop(Phase phase, int stage, const RunConfig& config, const TrainSet& data,
                 const PgtSet* pgt, Model model, TrainLog* log, TrainStats* stats,
                 int max_iterations) {
  const int n = static_cast<int>(data.samples.size());
  const int epochs = phase == Phase::kWarmup ? config.warmup_epochs : config.stage_epochs;
  const int per_epoch = iterations_per_epoch(n, config.batch_size);
  LrSchedule schedule;
  schedule.base_lr = phase == Phase::kWarmup && config.optim.warmup_lr > 0 ? config.optim.warmup_lr
                                                                           : config.optim.base_lr;
  schedule.power = config.optim.power;
  schedule.max_iter = epochs * per_epoch;
  schedule.validate();

  Sgd sgd(model.params(), SgdConfig{config.optim.momentum, config.optim.weight_decay});
  const std::vector<int> trainable =
      phase == Phase::kWarmup ? model.layout().classification_params() : std::vector<int>{};
  auto rng = stage_rng(config.seed, phase == Phase::kWarmup ? kWarmupStream
                                                            : static_cast<std::uint32_t>(stage));
  const std::string stage_name = phase == Phase::kWarmup ? "warmup" : std::to_string(stage);

  std::vector<int> order(static_cast<std::size_t>(n));
  int iter = 0;
  if (stats) *stats = TrainStats{};
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    if (stats) stats->epoch_totals.emplace_back();
    for (int b = 0; b < per_epoch; ++b) {
      if (max_iterations >= 0 && iter >= max_iterations) return model;
      const int begin = b * config.batch_size;
      const int end = std::min(n, begin + config.batch_size);
      ParamSet<float> grads = model.params().zeros_like();
      LossReport batch_loss;
      for (int k = begin; k < end; ++k) {
        const TrainSample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        if (phase == Phase::kWarmup) {
          const Example ex = augment(s.image, nullptr, nullptr, config, rng);
          add_report(batch_loss, warmup_step(model, ex, s.labels, grads));
        } else {
          const Example ex = augment(s.image, &pgt->seg.at(s.id), &pgt->sal.at(s.id), config, rng);
          add_report(batch_loss, joint_step(model, config, ex, s.labels, grads));
        }
      }
      const float inv = 1.0f / static_cast<float>(end - begin);
      for (auto& p : grads) p.value *= inv;
      scale_report(batch_loss, 1.0 / (end - begin));

      const double lr = poly_lr(schedule, iter);
      sgd.step(model.params(), grads, lr, trainable);
      if (log) log->record({stage_name, epoch, iter, lr, batch_loss});
      if (stats) stats->epoch_totals.back().push_back(batch_loss.total);
      ++iter;
      if (stats) stats->iterations = iter;
    }
    log::debug("{} epoch {} done", stage_name, epoch);
  }
  return model;
}

void check_dataset(const RunConfig& config, const TrainSet& data) {
  if (data.samples.empty()) throw ConfigError("training set '" + data.root.string() + "' is empty");
  for (const auto& s : data.samples) {
    for (int c : s.labels) {
      if (c > config.model.num_classes) {
        throw ConfigError(fmt::format("image '{}' has class id {} but model.num_classes={}", s.id,
                                      c, config.model.num_classes));
      }
    }
  }
}

CamStack cams_from_features(const Model& model, const BackboneFeatures<float>& features,
                            const std::vector<int>& labels, const AffinityMatrix<float>* aggregation,
                            int refine_iterations, int height, int width) {
  CamStack cams = normalize_cam(compute_cam(features, classifier_head(model), present_class_indices(labels)));
  if (aggregation) cams = refine_cam(cams, *aggregation, refine_iterations);
  return resize_cam(cams, height, width);
}

FeatureMap<float> mask_to_map(const LabelMask& m) {
  FeatureMap<float> out(m.height, m.width, 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.data(static_cast<Eigen::Index>(i), 0) = m.labels[i] ? 1.0f : 0.0f;
  }
  return out;
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

Image reflect_pad(const Image& img, int height, int width) {
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(y, x, c) = img.at(reflect(y, img.height), reflect(x, img.width), c);
  return out;
}

}  // namespace

Image network_input(const Image& image) {
  Image out = image;
  out.data.array() -= kInputCenter;
  return out;
}

// ---- checkpoints ----

json model_config_to_json(const ModelConfig& c) {
  return {{"backbone_depth", c.backbone_depth}, {"backbone_width", c.backbone_width},
          {"head_width", c.head_width},         {"num_classes", c.num_classes},
          {"stride", c.stride},                 {"fusion_hidden", c.fusion_hidden},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.backbone_depth = j.at("backbone_depth").get<int>();
    c.backbone_width = j.at("backbone_width").get<int>();
    c.head_width = j.at("head_width").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.stride = j.at("stride").get<int>();
    c.fusion_hidden = j.at("fusion_hidden").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad model config in checkpoint: ") + e.what());
  }
  c.validate();
  return c;
}

void save_checkpoint(const fs::path& path, const Model& model, const json& meta) {
  ArrayArchive archive;
  archive.meta = meta;
  archive.meta["kind"] = "checkpoint";
  archive.meta["model"] = model_config_to_json(model.config());
  for (const auto& p : model.params()) {
    NamedArray arr;
    arr.name = p.name;
    arr.shape.assign(p.shape.begin(), p.shape.end());
    arr.values.assign(p.value.data(), p.value.data() + p.value.size());
    archive.arrays.push_back(std::move(arr));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_archive(path, archive);
}

Model load_checkpoint(const fs::path& path, json* meta) {
  const ArrayArchive archive = read_archive(path);
  if (archive.meta.value("kind", "") != "checkpoint" || !archive.meta.contains("model")) {
    throw ValidationError("'" + path.string() + "' is not a model checkpoint");
  }
  const ModelConfig config = model_config_from_json(archive.meta.at("model"));
  ParamLayout layout;
  ParamSet<float> params = make_param_skeleton<float>(config, layout);
  for (auto& p : params) {
    const NamedArray* arr = archive.find(p.name);
    if (!arr) throw ValidationError("checkpoint '" + path.string() + "' lacks parameter " + p.name);
    if (static_cast<Eigen::Index>(arr->values.size()) != p.value.size()) {
      throw ValidationError(fmt::format("checkpoint '{}': parameter {} has {} values, expected {}",
                                        path.string(), p.name, arr->values.size(), p.value.size()));
    }
    std::copy(arr->values.begin(), arr->values.end(), p.value.data());
  }
  if (meta) *meta = archive.meta;
  return Model::from_params(config, params);
}

// ---- pseudo labels ----

void write_pgt(const fs::path& dir, const PgtSet& pgt) {
  const fs::path tmp = dir.parent_path() / (dir.filename().string() + ".partial");
  fs::remove_all(tmp);
  try {
    fs::create_directories(tmp / "seg");
    fs::create_directories(tmp / "sal");
    for (const auto& [id, mask] : pgt.seg) io::write_label_png(tmp / "seg" / (id + ".png"), mask);
    for (const auto& [id, mask] : pgt.sal) io::write_gray_png(tmp / "sal" / (id + ".png"), mask_to_map(mask));
    fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

PgtSet read_pgt(const fs::path& dir, const TrainSet& data, int stage) {
  PgtSet pgt;
  pgt.stage = stage;
  std::vector<std::string> missing;
  for (const auto& s : data.samples) {
    const fs::path seg = dir / "seg" / (s.id + ".png");
    const fs::path sal = dir / "sal" / (s.id + ".png");
    if (!fs::exists(seg) || !fs::exists(sal)) {
      missing.push_back(s.id);
      continue;
    }
    LabelMask seg_mask = io::read_label_png(seg);
    LabelMask sal_mask = binarize(io::read_gray_png(sal));
    if (seg_mask.height != s.image.height || seg_mask.width != s.image.width ||
        sal_mask.height != s.image.height || sal_mask.width != s.image.width) {
      throw ValidationError("pseudo labels for '" + s.id + "' in '" + dir.string() +
                            "' do not match the image size");
    }
    pgt.seg.emplace(s.id, std::move(seg_mask));
    pgt.sal.emplace(s.id, std::move(sal_mask));
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += fmt::format(", ... ({} total)", missing.size());
    throw PreconditionError(fmt::format("stage-{} pseudo labels under '{}' are missing for: {}", stage,
                                        dir.string(), list));
  }
  return pgt;
}

// ---- training ----

const std::vector<std::string>& TrainLog::header() {
  static const std::vector<std::string> h = {"stage", "epoch", "iter", "lr", "l_cls", "l_sal1",
                                             "l_sal2", "l_seg1", "l_seg2", "total"};
  return h;
}

void TrainLog::record(const TrainLogRow& row) {
  rows_.push_back(row);
  if (csv_.empty()) return;
  const auto& l = row.loss;
  append_csv(csv_, header(),
             {row.stage, std::to_string(row.epoch), std::to_string(row.iter),
              fmt::format("{:.6e}", row.lr), fmt::format("{:.6f}", l.l_cls),
              fmt::format("{:.6f}", l.l_sal1), fmt::format("{:.6f}", l.l_sal2),
              fmt::format("{:.6f}", l.l_seg1), fmt::format("{:.6f}", l.l_seg2),
              fmt::format("{:.6f}", l.total)});
}

int iterations_per_epoch(int samples, int batch_size) {
  return (samples + batch_size - 1) / batch_size;
}

Model warmup_classifier(const RunConfig& config, const TrainSet& data, TrainLog* log, TrainStats* stats) {
  check_dataset(config, data);
  return warmup_classifier(config, data, Model::build(config.model), log, stats);
}

Model warmup_classifier(const RunConfig& config, const TrainSet& data, Model init, TrainLog* log,
                        TrainStats* stats) {
  check_dataset(config, data);
  return train_loop(Phase::kWarmup, -1, config, data, nullptr, std::move(init), log, stats, -1);
}

Model run_stage(int stage, const RunConfig& config, const TrainSet& data, const PgtSet& pgt,
                Model init, TrainLog* log, TrainStats* stats, int max_iterations) {
  check_dataset(config, data);
  std::vector<std::string> missing;
  for (const auto& s : data.samples) {
    if (!pgt.seg.count(s.id) || !pgt.sal.count(s.id)) missing.push_back(s.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw PreconditionError(fmt::format("stage {} has no pseudo labels for: {}", stage, list));
  }
  return train_loop(Phase::kJoint, stage, config, data, &pgt, std::move(init), log, stats,
                    max_iterations);
}

CamStack image_cams(const Model& model, const Image& image, const std::vector<int>& labels,
                    const AffinityMatrix<float>* aggregation, int refine_iterations) {
  const auto features = forward_backbone(model, network_input(image));
  return cams_from_features(model, features, labels, aggregation, refine_iterations, image.height,
                            image.width);
}

PgtSet initial_pgt(const RunConfig& config, const Model& warm, const TrainSet& data) {
  PgtSet pgt;
  pgt.stage = 0;
  for (const auto& s : data.samples) {
    const CamStack cams = image_cams(warm, s.image, s.labels, nullptr, 0);
    pgt.seg.emplace(s.id, bootstrap_initial_seg_pgt(cams, s.offline_saliency,
                                                    present_class_indices(s.labels),
                                                    config.pgt.thresholds));
    pgt.sal.emplace(s.id, update_saliency_pgt(0, s.offline_saliency, nullptr, s.image, config.crf).map);
  }
  return pgt;
}

PgtSet refresh_labels(int stage, const RunConfig& config, const Model& model, const TrainSet& data,
                      bool force_identity) {
  PgtSet pgt;
  pgt.stage = stage + 1;
  for (const auto& s : data.samples) {
    const auto trace = network_forward<float>(model.config(), model.layout(), model.params(),
                                              network_input(s.image), config.forward_options());
    const AffinityMatrix<float> aggregation =
        force_identity ? AffinityMatrix<float>::identity(trace.features().height, trace.features().width)
                       : trace.aggregation;
    BackboneFeatures<float> features{trace.features(), model.config().stride};
    const CamStack cams = cams_from_features(model, features, s.labels, &aggregation,
                                             config.pgt.cam_refine_iterations, s.image.height,
                                             s.image.width);
    pgt.seg.emplace(s.id, generate_seg_pgt(cams, s.offline_saliency, present_class_indices(s.labels),
                                           config.pgt.thresholds));

    FeatureMap<float> ref_sal = force_identity ? trace.sal_prob : trace.ref_sal;
    ref_sal = nn::resize_bilinear(ref_sal, s.image.height, s.image.width);
    pgt.sal.emplace(s.id, update_saliency_pgt(stage + 1, s.offline_saliency, &ref_sal, s.image,
                                              config.crf).map);
  }
  return pgt;
}

// ---- inference / evaluation ----

InferOptions infer_options(const RunConfig& config) {
  InferOptions o;
  o.forward = config.forward_options();
  o.crf = config.infer_crf;
  o.crf_params = config.crf;
  return o;
}

FeatureMap<float> infer_probs(const Model& model, const Image& image, const InferOptions& options) {
  const int stride = model.config().stride;
  const int ph = (image.height + stride - 1) / stride * stride;
  const int pw = (image.width + stride - 1) / stride * stride;
  const bool padded = ph != image.height || pw != image.width;
  const Image input = network_input(padded ? reflect_pad(image, ph, pw) : image);

  ForwardOptions fwd = options.forward;
  fwd.classifier_only = false;
  const auto trace = network_forward<float>(model.config(), model.layout(), model.params(), input, fwd);
  FeatureMap<float> probs = nn::resize_bilinear(trace.ref_seg, ph, pw);
  if (padded) {
    FeatureMap<float> cropped(image.height, image.width, probs.channels());
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x)
        cropped.data.row(y * image.width + x) = probs.data.row(y * pw + x);
    probs = std::move(cropped);
  }
  if (options.crf) probs = dense_crf(probs, image, options.crf_params);
  return probs;
}

LabelMask argmax_labels(const FeatureMap<float>& probs) {
  LabelMask out(probs.height, probs.width);
  for (int i = 0; i < probs.pixels(); ++i) {
    Eigen::Index best = 0;
    probs.data.row(i).maxCoeff(&best);
    out.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMask infer(const Model& model, const Image& image, const InferOptions& options) {
  return argmax_labels(infer_probs(model, image, options));
}

ConfusionMatrix evaluate(const Model& model, const EvalSet& data, const InferOptions& options,
                         const fs::path& preds_dir) {
  ConfusionMatrix conf(model.config().num_classes + 1);
  if (!preds_dir.empty()) fs::create_directories(preds_dir);
  for (const auto& e : data.samples) {
    const LabelMask pred = infer(model, e.sample.image, options);
    accumulate(conf, pred, e.gt_mask);
    if (!preds_dir.empty()) io::write_label_png(preds_dir / (e.sample.id + ".png"), pred);
  }
  return conf;
}

PgtQuality measure_pgt(const PgtSet& pgt, const EvalSet& truth, int num_classes) {
  ConfusionMatrix conf(num_classes + 1);
  int matched = 0;
  for (const auto& e : truth.samples) {
    const auto it = pgt.seg.find(e.sample.id);
    if (it == pgt.seg.end()) continue;
    accumulate(conf, it->second, e.gt_mask);
    ++matched;
  }
  if (matched == 0) throw PreconditionError("no pseudo labels match the ground-truth image ids");
  return pgt_quality(conf, pgt.stage);
}

// ---- orchestration ----

RunResult run_training(const RunConfig& config, const RunOptions& options) {
  config.validate();
  const fs::path& run = options.run_dir;
  if (run.empty()) throw ConfigError("run directory must be set");
  fs::create_directories(run / "checkpoints");
  fs::create_directories(run / "pgt");
  fs::create_directories(run / "metrics");
  for (const char* f : {"train_log.csv", "eval.csv", "pgt.csv"}) fs::remove(run / "metrics" / f);
  write_file_atomic(run / "config.json", to_json(config).dump(2) + "\n");

  json events = json::array();
  const fs::path manifest = run / "manifest.json";
  auto add_event = [&](json event) {
    events.push_back(std::move(event));
    write_file_atomic(manifest, json{{"events", events}}.dump(2) + "\n");
  };
  add_event({{"event", "start"}, {"seed", config.seed}, {"stages", config.stages}});

  const TrainSet data = load_train_set(config.paths.train);
  check_dataset(config, data);
  log::info("loaded {} training images from {}", data.samples.size(), config.paths.train);

  // Ground truth is read only by the metrics code below, never by training.
  std::optional<EvalSet> eval_set, train_truth;
  if (options.evaluate) {
    if (fs::exists(fs::path(config.paths.eval) / "gt_masks")) {
      eval_set = load_eval_set(config.paths.eval);
    } else {
      log::warn("no evaluation set at '{}'; skipping evaluation", config.paths.eval);
    }
  }
  if (options.measure_pgt) {
    if (fs::exists(fs::path(config.paths.train) / "gt_masks")) {
      train_truth = load_eval_set(config.paths.train);
    } else {
      log::warn("training set has no gt_masks; pseudo-label quality not measured");
    }
  }

  RunResult result;
  TrainLog train_log(run / "metrics" / "train_log.csv");
  const InferOptions infer_opts = infer_options(config);

  Model warm = options.warmup_checkpoint ? load_checkpoint(*options.warmup_checkpoint)
                                         : warmup_classifier(config, data, &train_log);
  result.warmup_checkpoint = run / "checkpoints" / "warmup.ckpt";
  save_checkpoint(result.warmup_checkpoint, warm, {{"phase", "warmup"}});
  add_event({{"event", "warmup"}, {"checkpoint", "checkpoints/warmup.ckpt"},
             {"reused", options.warmup_checkpoint.has_value()}});

  auto record_pgt = [&](const PgtSet& pgt, StageState& state) {
    state.pgt_dir = run / "pgt" / fmt::format("stage_{}", pgt.stage);
    write_pgt(state.pgt_dir, pgt);
    if (train_truth) {
      const PgtQuality q = measure_pgt(pgt, *train_truth, config.model.num_classes);
      state.pgt_quality = q;
      append_csv(run / "metrics" / "pgt.csv", {"stage", "precision", "recall", "miou"},
                 {std::to_string(q.stage), fmt::format("{:.4f}", q.precision),
                  fmt::format("{:.4f}", q.recall), fmt::format("{:.4f}", q.miou)});
      log::info("stage {} pseudo labels: precision {:.2f} recall {:.2f} mIoU {:.2f}", q.stage,
                q.precision, q.recall, q.miou);
    }
  };

  PgtSet pgt = options.initial_pgt_dir ? read_pgt(*options.initial_pgt_dir, data, 0)
                                       : initial_pgt(config, warm, data);
  StageState state;
  state.stage = 0;
  record_pgt(pgt, state);
  add_event({{"event", "pgt"}, {"stage", 0}, {"dir", "pgt/stage_0"}});

  Model current = warm;
  for (int s = 0; s < config.stages; ++s) {
    state.stage = s;
    Model init = config.continue_training ? current : warm;
    current = run_stage(s, config, data, pgt, std::move(init), &train_log);
    state.checkpoint = run / "checkpoints" / fmt::format("stage_{}.ckpt", s);
    save_checkpoint(state.checkpoint, current, {{"phase", "stage"}, {"stage", s}});
    add_event({{"event", "train"}, {"stage", s},
               {"checkpoint", fmt::format("checkpoints/stage_{}.ckpt", s)}});

    if (eval_set) {
      const bool last = s + 1 == config.stages;
      const fs::path preds = last && options.write_preds ? run / "preds" : fs::path{};
      const double m = miou(evaluate(current, *eval_set, infer_opts, preds));
      state.eval_miou = m;
      append_csv(run / "metrics" / "eval.csv", {"stage", "split", "miou"},
                 {std::to_string(s), "eval", fmt::format("{:.4f}", m)});
      log::emit(log::Level::kInfo, fmt::format("stage {} eval mIoU {:.2f}", s, m),
                {{"stage", s}, {"miou", m}});
    }
    result.stages.push_back(state);

    if (s + 1 < config.stages) {
      pgt = refresh_labels(s, config, current, data);
      state = StageState{};
      state.stage = s + 1;
      record_pgt(pgt, state);
      add_event({{"event", "refresh"}, {"from_stage", s}, {"stage", s + 1},
                 {"dir", fmt::format("pgt/stage_{}", s + 1)}});
    }
  }
  result.final_checkpoint = state.checkpoint;
  add_event({{"event", "done"}});
  return result;
}

}  // namespace auxseg
