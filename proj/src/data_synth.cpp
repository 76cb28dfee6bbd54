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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/data.hpp"
#include "auxseg/errors.hpp"
#include "auxseg/image_io.hpp"

namespace auxseg {
namespace {

namespace fs = std::filesystem;

std::atomic<std::size_t> g_gt_loads{0};

struct Rgb {
  float r, g, b;
};

constexpr Rgb kPalette[] = {
    {0.85f, 0.20f, 0.20f},  // circle: red
    {0.20f, 0.75f, 0.25f},  // square: green
    {0.20f, 0.30f, 0.85f},  // triangle: blue
    {0.85f, 0.80f, 0.15f},  // diamond: yellow
    {0.80f, 0.25f, 0.80f},  // cross: magenta
};

bool inside(const std::string& shape, double dx, double dy, double r) {
  if (shape == "circle") return dx * dx + dy * dy <= r * r;
  if (shape == "square") return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
  if (shape == "diamond") return std::abs(dx) + std::abs(dy) <= r;
  if (shape == "cross") {
    return (std::abs(dx) <= r / 3 && std::abs(dy) <= r) ||
           (std::abs(dy) <= r / 3 && std::abs(dx) <= r);
  }
  // Upward triangle with vertices (0,-r), (-0.866r, 0.5r), (0.866r, 0.5r).
  if (dy > 0.5 * r || dy < -r) return false;
  const double half_width = 0.866 * r * (dy + r) / (1.5 * r);
  return std::abs(dx) <= half_width;
}

std::mt19937_64 sample_rng(std::uint64_t seed, int index, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), stream};
  return std::mt19937_64(seq);
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    total += v;
  }
  for (float& v : k) v = static_cast<float>(v / total);
  return k;
}

FeatureMap<float> blur(const FeatureMap<float>& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int h = in.height, w = in.width;
  FeatureMap<float> tmp(h, w, 1), out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * in.at(y, std::clamp(x + i, 0, w - 1), 0);
      }
      tmp.at(y, x, 0) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x, 0);
      }
      out.at(y, x, 0) = acc;
    }
  }
  return out;
}

FeatureMap<float> dilate(const FeatureMap<float>& in, int radius) {
  FeatureMap<float> out(in.height, in.width, 1);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float best = 0;
      for (int dy = -radius; dy <= radius && best < 1; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > radius * radius) continue;
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= in.height || xx < 0 || xx >= in.width) continue;
          best = std::max(best, in.at(yy, xx, 0));
        }
      }
      out.at(y, x, 0) = best;
    }
  }
  return out;
}

std::string image_id(int index) { return fmt::format("img_{:05d}", index); }

nlohmann::json read_labels_json(const fs::path& dir) {
  const fs::path path = dir / "labels" / "labels.json";
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse '" + path.string() + "': " + e.what());
  }
}

std::vector<std::string> list_image_ids(const fs::path& dir) {
  const fs::path images = dir / "images";
  if (!fs::is_directory(images)) throw IoError("missing directory '" + images.string() + "'");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw ValidationError("no images found in '" + images.string() + "'");
  return ids;
}

TrainSample load_sample(const fs::path& dir, const std::string& id, const nlohmann::json& labels) {
  TrainSample s;
  s.id = id;
  s.image = io::read_rgb_png(dir / "images" / (id + ".png"));
  const fs::path sal_path = dir / "saliency" / (id + ".png");
  s.offline_saliency = io::read_gray_png(sal_path);
  if (s.offline_saliency.height != s.image.height || s.offline_saliency.width != s.image.width) {
    throw ValidationError("saliency '" + sal_path.string() + "' does not match its image size");
  }
  if (!labels.contains(id)) {
    throw ValidationError("labels.json has no entry for image '" + id + "'");
  }
  try {
    s.labels = labels.at(id).get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("labels.json entry for '" + id + "' is malformed: " + e.what());
  }
  std::sort(s.labels.begin(), s.labels.end());
  s.labels.erase(std::unique(s.labels.begin(), s.labels.end()), s.labels.end());
  for (int c : s.labels) {
    if (c < 1 || c >= kIgnoreLabel) {
      throw ValidationError(fmt::format("labels.json entry for '{}' has invalid class id {}", id, c));
    }
  }
  return s;
}

}  // namespace

const std::vector<std::string>& known_shapes() {
  static const std::vector<std::string> shapes = {"circle", "square", "triangle", "diamond",
                                                  "cross"};
  return shapes;
}

void SynthSpec::validate(int stride) const {
  std::vector<std::string> problems;
  if (num_images < 1) problems.push_back("num_images must be positive");
  if (image_size < 16) problems.push_back("image_size must be at least 16");
  if (stride > 0 && image_size % stride != 0) {
    problems.push_back(fmt::format("image_size={} not divisible by stride {}", image_size, stride));
  }
  if (classes.empty()) problems.push_back("classes must be non-empty");
  for (const auto& c : classes) {
    if (std::find(known_shapes().begin(), known_shapes().end(), c) == known_shapes().end()) {
      problems.push_back("unknown shape class '" + c + "'");
    }
  }
  if (std::set<std::string>(classes.begin(), classes.end()).size() != classes.size()) {
    problems.push_back("duplicate shape classes");
  }
  if (min_shapes < 1 || max_shapes < min_shapes) problems.push_back("shape count range invalid");
  if (noise < 0) problems.push_back("noise must be non-negative");
  if (corruption.dilation_radius < 0 || corruption.blur_sigma < 0 || corruption.dropout_prob < 0 ||
      corruption.dropout_prob > 1 || corruption.dropout_patch < 1) {
    problems.push_back("saliency corruption parameters out of range");
  }
  if (!problems.empty()) {
    std::string msg = "invalid synthetic dataset spec:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

FeatureMap<float> foreground_map(const LabelMask& mask) {
  FeatureMap<float> out(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto l = mask.labels[i];
    out.data(static_cast<Eigen::Index>(i), 0) = (l > 0 && l != kIgnoreLabel) ? 1.0f : 0.0f;
  }
  return out;
}

FeatureMap<float> corrupt_saliency(const FeatureMap<float>& foreground,
                                   const SaliencyCorruption& c, std::uint64_t seed) {
  FeatureMap<float> sal = foreground;
  if (c.dilation_radius > 0) sal = dilate(sal, c.dilation_radius);
  if (c.blur_sigma > 0) sal = blur(sal, c.blur_sigma);
  if (c.dropout_prob > 0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution drop(c.dropout_prob);
    for (int py = 0; py < sal.height; py += c.dropout_patch) {
      for (int px = 0; px < sal.width; px += c.dropout_patch) {
        if (!drop(rng)) continue;
        for (int y = py; y < std::min(py + c.dropout_patch, sal.height); ++y) {
          for (int x = px; x < std::min(px + c.dropout_patch, sal.width); ++x) sal.at(y, x, 0) = 0;
        }
      }
    }
  }
  sal.data = sal.data.cwiseMax(0.0f).cwiseMin(1.0f);
  return sal;
}

EvalSample synthesize_sample(const SynthSpec& spec, int index) {
  auto rng = sample_rng(spec.seed, index, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = spec.image_size;
  const double scale = n / 64.0;

  EvalSample out;
  TrainSample& s = out.sample;
  s.id = image_id(index);
  s.image = Image(n, n, 3);
  out.gt_mask = LabelMask(n, n, 0);

  const double gray = 0.3 + 0.3 * unit(rng);
  const float base[3] = {static_cast<float>(gray + 0.05 * (unit(rng) - 0.5)),
                         static_cast<float>(gray + 0.05 * (unit(rng) - 0.5)),
                         static_cast<float>(gray + 0.05 * (unit(rng) - 0.5))};
  const double fx = (0.05 + 0.15 * unit(rng)) * 2 * std::numbers::pi / scale;
  const double fy = (0.05 + 0.15 * unit(rng)) * 2 * std::numbers::pi / scale;
  const double ph1 = 2 * std::numbers::pi * unit(rng), ph2 = 2 * std::numbers::pi * unit(rng);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const float tex = static_cast<float>(spec.noise * std::sin(fx * x + ph1) * std::sin(fy * y + ph2));
      for (int ch = 0; ch < 3; ++ch) s.image.at(y, x, ch) = base[ch] + tex;
    }
  }

  std::uniform_int_distribution<int> count_dist(spec.min_shapes, spec.max_shapes);
  std::uniform_int_distribution<int> class_dist(0, static_cast<int>(spec.classes.size()) - 1);
  const int shapes = count_dist(rng);
  for (int k = 0; k < shapes; ++k) {
    const int cls = class_dist(rng);
    const auto palette_idx =
        std::find(known_shapes().begin(), known_shapes().end(), spec.classes[cls]) -
        known_shapes().begin();
    const Rgb color = kPalette[palette_idx];
    const double r = (7.0 + 7.0 * unit(rng)) * scale;
    const double cx = r + (n - 2 * r) * unit(rng);
    const double cy = r + (n - 2 * r) * unit(rng);
    const float jitter[3] = {static_cast<float>(0.16 * (unit(rng) - 0.5)),
                             static_cast<float>(0.16 * (unit(rng) - 0.5)),
                             static_cast<float>(0.16 * (unit(rng) - 0.5))};
    const float rgb[3] = {color.r, color.g, color.b};
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (!inside(spec.classes[cls], x + 0.5 - cx, y + 0.5 - cy, r)) continue;
        for (int ch = 0; ch < 3; ++ch) s.image.at(y, x, ch) = rgb[ch] + jitter[ch];
        out.gt_mask.at(y, x) = static_cast<std::uint8_t>(cls + 1);
      }
    }
  }

  std::uniform_real_distribution<float> pixel_noise(-0.5f, 0.5f);
  for (Eigen::Index i = 0; i < s.image.data.size(); ++i) {
    float& v = s.image.data.data()[i];
    v = std::clamp(v + static_cast<float>(spec.noise) * pixel_noise(rng), 0.0f, 1.0f);
  }
  // Quantize to what the PNG round trip will store.
  s.image.data = ((s.image.data.array() * 255.0f).round() / 255.0f).matrix();

  std::set<int> present;
  for (auto l : out.gt_mask.labels) {
    if (l > 0) present.insert(l);
  }
  s.labels.assign(present.begin(), present.end());

  auto corruption_seed = sample_rng(spec.seed, index, 1)();
  s.offline_saliency = corrupt_saliency(foreground_map(out.gt_mask), spec.corruption, corruption_seed);
  s.offline_saliency.data = ((s.offline_saliency.data.array() * 255.0f).round() / 255.0f).matrix();
  return out;
}

void generate(const SynthSpec& spec, const fs::path& dir) {
  spec.validate(0);
  std::error_code ec;
  for (const char* sub : {"images", "labels", "saliency", "gt_masks"}) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw IoError("cannot create '" + (dir / sub).string() + "': " + ec.message());
  }
  nlohmann::json labels = nlohmann::json::object();
  for (int i = 0; i < spec.num_images; ++i) {
    const EvalSample s = synthesize_sample(spec, i);
    io::write_rgb_png(dir / "images" / (s.sample.id + ".png"), s.sample.image);
    io::write_gray_png(dir / "saliency" / (s.sample.id + ".png"), s.sample.offline_saliency);
    io::write_label_png(dir / "gt_masks" / (s.sample.id + ".png"), s.gt_mask);
    labels[s.sample.id] = s.sample.labels;
  }
  write_file_atomic(dir / "labels" / "labels.json", labels.dump(1) + "\n");
}

TrainSet load_train_set(const fs::path& dir) {
  TrainSet set;
  set.root = dir;
  const auto labels = read_labels_json(dir);
  for (const auto& id : list_image_ids(dir)) set.samples.push_back(load_sample(dir, id, labels));
  return set;
}

EvalSet load_eval_set(const fs::path& dir) {
  EvalSet set;
  set.root = dir;
  const auto labels = read_labels_json(dir);
  for (const auto& id : list_image_ids(dir)) {
    EvalSample e;
    e.sample = load_sample(dir, id, labels);
    const fs::path mask_path = dir / "gt_masks" / (id + ".png");
    e.gt_mask = io::read_label_png(mask_path);
    ++g_gt_loads;
    if (e.gt_mask.height != e.sample.image.height || e.gt_mask.width != e.sample.image.width) {
      throw ValidationError("mask '" + mask_path.string() + "' does not match its image size");
    }
    std::set<int> in_mask;
    for (auto l : e.gt_mask.labels) {
      if (l > 0 && l != kIgnoreLabel) in_mask.insert(l);
    }
    const std::set<int> in_labels(e.sample.labels.begin(), e.sample.labels.end());
    if (in_mask != in_labels) {
      throw ValidationError(fmt::format(
          "labels.json and '{}' disagree on the classes present in '{}'", mask_path.string(), id));
    }
    set.samples.push_back(std::move(e));
  }
  return set;
}

RowVector<float> label_vector(const std::vector<int>& labels, int num_classes) {
  RowVector<float> v = RowVector<float>::Zero(num_classes);
  for (int c : labels) {
    if (c < 1 || c > num_classes) {
      throw DomainError(fmt::format("class id {} outside 1..{}", c, num_classes));
    }
    v(c - 1) = 1.0f;
  }
  return v;
}

std::vector<int> present_class_indices(const std::vector<int>& labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (int c : labels) out.push_back(c - 1);
  return out;
}

std::size_t gt_mask_load_count() { return g_gt_loads; }

}  // namespace auxseg
