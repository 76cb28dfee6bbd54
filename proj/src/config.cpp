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

#include "auxseg/config.hpp"

#include <set>
#include <sstream>

#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/errors.hpp"

namespace auxseg {
namespace {

using nlohmann::json;

// Collects problems from a sub-config validator ("header\n  line\n  line").
template <typename Fn>
void collect(std::vector<std::string>& problems, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    std::istringstream lines(e.what());
    std::string line;
    std::getline(lines, line);  // header
    bool any = false;
    while (std::getline(lines, line)) {
      const auto start = line.find_first_not_of(' ');
      if (start != std::string::npos) problems.push_back(line.substr(start));
      any = true;
    }
    if (!any) problems.push_back(e.what());
  }
}

// Reads an object's keys into typed fields, recording every mismatch.
class Reader {
 public:
  Reader(const json& obj, std::string prefix, std::vector<std::string>& problems)
      : obj_(obj), prefix_(std::move(prefix)), problems_(problems) {
    if (!obj_.is_object()) {
      problems_.push_back(fmt::format("{}: expected an object", name_or_root()));
    }
  }

  ~Reader() {
    if (!obj_.is_object()) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) problems_.push_back(fmt::format("{}: unknown key", path(key)));
    }
  }

  template <typename T>
  void field(const char* key, T& target) {
    seen_.insert(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return mismatch(key, "a boolean");
      target = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return mismatch(key, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
          target = v.get<T>();
        } else {
          problems_.push_back(fmt::format("{}: must be non-negative", path(key)));
        }
      } else {
        target = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return mismatch(key, "a number");
      target = v.get<T>();
    } else {
      if (!v.is_string()) return mismatch(key, "a string");
      target = v.get<std::string>();
    }
  }

  // Returns the sub-object (or an empty object when absent).
  const json& child(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    if (!obj_.is_object() || !obj_.contains(key)) return empty;
    return obj_.at(key);
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

 private:
  void mismatch(const char* key, const char* expected) {
    problems_.push_back(fmt::format("{}: expected {}, got {}", path(key), expected,
                                    obj_.at(key).dump()));
  }
  std::string name_or_root() const { return prefix_.empty() ? "config" : prefix_; }

  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

void throw_if(const std::vector<std::string>& problems) {
  if (problems.empty()) return;
  std::string msg = fmt::format("invalid run config ({} problem{}):", problems.size(),
                                problems.size() == 1 ? "" : "s");
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> problems;
  if (stages < 1) problems.push_back(fmt::format("stages={} must be >= 1", stages));
  if (warmup_epochs < 1) problems.push_back(fmt::format("warmup_epochs={} must be >= 1", warmup_epochs));
  if (stage_epochs < 1) problems.push_back(fmt::format("stage_epochs={} must be >= 1", stage_epochs));
  if (batch_size < 1) problems.push_back(fmt::format("batch_size={} must be >= 1", batch_size));
  if (crop < 1) problems.push_back(fmt::format("crop={} must be positive", crop));
  collect(problems, [&] { model.validate(); });
  if (crop >= 1 && model.stride > 0 && crop % model.stride != 0) {
    problems.push_back(fmt::format("crop={} is not divisible by model.stride={} ({} = {}*{} + {})",
                                   crop, model.stride, crop, model.stride, crop / model.stride,
                                   crop % model.stride));
  }
  collect(problems, [&] { loss.validate(); });
  if (!(optim.base_lr > 0)) problems.push_back("optim.base_lr must be positive");
  if (!(optim.power > 0)) problems.push_back("optim.power must be positive");
  if (!(optim.momentum >= 0 && optim.momentum < 1)) problems.push_back("optim.momentum must lie in [0, 1)");
  if (!(optim.weight_decay >= 0)) problems.push_back("optim.weight_decay must be non-negative");
  if (!(optim.warmup_lr >= 0)) problems.push_back("optim.warmup_lr must be non-negative");
  collect(problems, [&] { pgt.thresholds.validate(); });
  if (pgt.cam_refine_iterations < 1) problems.push_back("pgt.cam_refine_iterations must be >= 1");
  collect(problems, [&] { crf.validate(); });
  if (!(augment.color_jitter >= 0 && augment.color_jitter < 1)) {
    problems.push_back("augment.color_jitter must lie in [0, 1)");
  }
  if (paths.train.empty()) problems.push_back("paths.train must not be empty");
  throw_if(problems);
}

ForwardOptions RunConfig::forward_options() const {
  ForwardOptions o;
  o.affinity = affinity;
  o.transpose_affinity = pgt.transpose_affinity;
  return o;
}

json to_json(const RunConfig& c) {
  return json{
      {"stages", c.stages},
      {"warmup_epochs", c.warmup_epochs},
      {"stage_epochs", c.stage_epochs},
      {"batch_size", c.batch_size},
      {"crop", c.crop},
      {"seed", c.seed},
      {"paths", {{"train", c.paths.train}, {"eval", c.paths.eval}}},
      {"model",
       {{"backbone_depth", c.model.backbone_depth},
        {"backbone_width", c.model.backbone_width},
        {"head_width", c.model.head_width},
        {"num_classes", c.model.num_classes},
        {"stride", c.model.stride},
        {"fusion_hidden", c.model.fusion_hidden}}},
      {"loss", {{"lambda_cls", c.loss.cls}, {"lambda_sal", c.loss.sal}, {"lambda_seg", c.loss.seg}}},
      {"optim",
       {{"base_lr", c.optim.base_lr},
        {"power", c.optim.power},
        {"momentum", c.optim.momentum},
        {"weight_decay", c.optim.weight_decay},
        {"warmup_lr", c.optim.warmup_lr}}},
      {"pgt",
       {{"theta_fg", c.pgt.thresholds.foreground},
        {"theta_bg", c.pgt.thresholds.background},
        {"cam_refine_iterations", c.pgt.cam_refine_iterations},
        {"transpose_affinity", c.pgt.transpose_affinity}}},
      {"crf",
       {{"iterations", c.crf.iterations},
        {"spatial_sigma", c.crf.spatial_sigma},
        {"bilateral_sigma_xy", c.crf.bilateral_sigma_xy},
        {"bilateral_sigma_rgb", c.crf.bilateral_sigma_rgb},
        {"spatial_weight", c.crf.spatial_weight},
        {"bilateral_weight", c.crf.bilateral_weight},
        {"potts_compat", c.crf.potts_compat},
        {"reference_size", c.crf.reference_size}}},
      {"affinity", to_string(c.affinity)},
      {"refinement_losses", {{"sal", c.sal_refine_loss}, {"seg", c.seg_refine_loss}}},
      {"augment", {{"flip", c.augment.flip}, {"color_jitter", c.augment.color_jitter}}},
      {"continue_training", c.continue_training},
      {"infer_crf", c.infer_crf},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  std::vector<std::string> problems;
  {
    Reader r(j, "", problems);
    r.field("stages", c.stages);
    r.field("warmup_epochs", c.warmup_epochs);
    r.field("stage_epochs", c.stage_epochs);
    r.field("batch_size", c.batch_size);
    r.field("crop", c.crop);
    r.field("seed", c.seed);
    r.field("continue_training", c.continue_training);
    r.field("infer_crf", c.infer_crf);
    std::string affinity = to_string(c.affinity);
    r.field("affinity", affinity);
    try {
      c.affinity = affinity_mode_from_string(affinity);
    } catch (const ConfigError& e) {
      problems.push_back(std::string("affinity: ") + e.what());
    }
    {
      Reader p(r.child("paths"), "paths", problems);
      p.field("train", c.paths.train);
      p.field("eval", c.paths.eval);
    }
    {
      Reader m(r.child("model"), "model", problems);
      m.field("backbone_depth", c.model.backbone_depth);
      m.field("backbone_width", c.model.backbone_width);
      m.field("head_width", c.model.head_width);
      m.field("num_classes", c.model.num_classes);
      m.field("stride", c.model.stride);
      m.field("fusion_hidden", c.model.fusion_hidden);
    }
    {
      Reader l(r.child("loss"), "loss", problems);
      l.field("lambda_cls", c.loss.cls);
      l.field("lambda_sal", c.loss.sal);
      l.field("lambda_seg", c.loss.seg);
    }
    {
      Reader o(r.child("optim"), "optim", problems);
      o.field("base_lr", c.optim.base_lr);
      o.field("power", c.optim.power);
      o.field("momentum", c.optim.momentum);
      o.field("weight_decay", c.optim.weight_decay);
      o.field("warmup_lr", c.optim.warmup_lr);
    }
    {
      Reader p(r.child("pgt"), "pgt", problems);
      p.field("theta_fg", c.pgt.thresholds.foreground);
      p.field("theta_bg", c.pgt.thresholds.background);
      p.field("cam_refine_iterations", c.pgt.cam_refine_iterations);
      p.field("transpose_affinity", c.pgt.transpose_affinity);
    }
    {
      Reader k(r.child("crf"), "crf", problems);
      k.field("iterations", c.crf.iterations);
      k.field("spatial_sigma", c.crf.spatial_sigma);
      k.field("bilateral_sigma_xy", c.crf.bilateral_sigma_xy);
      k.field("bilateral_sigma_rgb", c.crf.bilateral_sigma_rgb);
      k.field("spatial_weight", c.crf.spatial_weight);
      k.field("bilateral_weight", c.crf.bilateral_weight);
      k.field("potts_compat", c.crf.potts_compat);
      k.field("reference_size", c.crf.reference_size);
    }
    {
      Reader f(r.child("refinement_losses"), "refinement_losses", problems);
      f.field("sal", c.sal_refine_loss);
      f.field("seg", c.seg_refine_loss);
    }
    {
      Reader a(r.child("augment"), "augment", problems);
      a.field("flip", c.augment.flip);
      a.field("color_jitter", c.augment.color_jitter);
    }
  }
  c.model.seed = c.seed;
  collect(problems, [&] { c.validate(); });
  throw_if(problems);
  return c;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig make_run_config(json j, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file '" + path.string() + "' does not exist");
  }
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return make_run_config(std::move(j), overrides);
}

}  // namespace auxseg
