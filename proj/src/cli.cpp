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

#include "auxseg/cli.hpp"

#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "auxseg/archive.hpp"
#include "auxseg/cam.hpp"
#include "auxseg/config.hpp"
#include "auxseg/data.hpp"
#include "auxseg/errors.hpp"
#include "auxseg/image_io.hpp"
#include "auxseg/log.hpp"
#include "auxseg/metrics.hpp"
#include "auxseg/nn.hpp"
#include "auxseg/pipeline.hpp"
#include "auxseg/pseudo_labels.hpp"

namespace auxseg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Options shared by every command that reads a RunConfig.
struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "RunConfig JSON file (defaults when omitted)");
    cmd->add_option("--set", overrides, "Dotted config override key=value (repeatable)");
  }

  RunConfig load(std::vector<std::string> extra = {}) const {
    std::vector<std::string> all = overrides;
    all.insert(all.begin(), extra.begin(), extra.end());
    if (path.empty()) return make_run_config(json::object(), all);
    return load_run_config(path, all);
  }
};

void require_dir(const std::string& path, const char* what) {
  if (!fs::is_directory(path)) {
    throw ValidationError(fmt::format("{} '{}' does not exist or is not a directory", what, path));
  }
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw ValidationError(fmt::format("{} '{}' does not exist", what, path));
  }
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  std::vector<std::string> unknown;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_images") s.num_images = value.get<int>();
      else if (key == "image_size") s.image_size = value.get<int>();
      else if (key == "classes") s.classes = value.get<std::vector<std::string>>();
      else if (key == "min_shapes") s.min_shapes = value.get<int>();
      else if (key == "max_shapes") s.max_shapes = value.get<int>();
      else if (key == "noise") s.noise = value.get<double>();
      else if (key == "seed") s.seed = value.get<std::uint64_t>();
      else if (key == "corruption") {
        for (const auto& [ck, cv] : value.items()) {
          if (ck == "dilation_radius") s.corruption.dilation_radius = cv.get<int>();
          else if (ck == "blur_sigma") s.corruption.blur_sigma = cv.get<double>();
          else if (ck == "dropout_prob") s.corruption.dropout_prob = cv.get<double>();
          else if (ck == "dropout_patch") s.corruption.dropout_patch = cv.get<int>();
          else unknown.push_back("corruption." + ck);
        }
      } else {
        unknown.push_back(key);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad synthetic dataset spec: ") + e.what());
  }
  if (!unknown.empty()) {
    std::string msg = "unknown synthetic dataset spec keys:";
    for (const auto& k : unknown) msg += "\n  " + k;
    throw ConfigError(msg);
  }
  return s;
}

int run_synth(const std::string& config_path, const std::string& out,
              const std::vector<std::string>& overrides) {
  json j = json::object();
  if (!config_path.empty()) {
    require_file(config_path, "dataset spec");
    try {
      j = json::parse(read_file(config_path));
    } catch (const json::exception& e) {
      throw ConfigError("dataset spec '" + config_path + "' is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  const SynthSpec spec = synth_spec_from_json(j);
  spec.validate(0);
  generate(spec, out);
  log::info("wrote {} synthetic images to {}", spec.num_images, out);
  return kExitOk;
}

int run_train(const ConfigArgs& cfg, const std::string& run_dir, const std::string& warmup_ckpt) {
  const RunConfig config = cfg.load();
  require_dir(config.paths.train, "training set");
  RunOptions opts;
  opts.run_dir = run_dir;
  if (!warmup_ckpt.empty()) {
    require_file(warmup_ckpt, "warm-up checkpoint");
    opts.warmup_checkpoint = warmup_ckpt;
  }
  const RunResult r = run_training(config, opts);
  for (const auto& s : r.stages) {
    json fields = {{"stage", s.stage}, {"checkpoint", s.checkpoint.string()}};
    if (s.eval_miou) fields["eval_miou"] = *s.eval_miou;
    log::emit(log::Level::kInfo, fmt::format("stage {} complete", s.stage), fields);
  }
  std::cout << "final checkpoint: " << r.final_checkpoint.string() << "\n";
  return kExitOk;
}

int run_refine_cam(const ConfigArgs& cfg, const std::string& ckpt, const std::string& data_dir,
                   const std::string& out, bool raw, bool identity, bool export_affinity) {
  const RunConfig config = cfg.load();
  require_file(ckpt, "checkpoint");
  require_dir(data_dir, "dataset");
  const Model model = load_checkpoint(ckpt);
  const TrainSet data = load_train_set(data_dir);
  fs::create_directories(out);
  for (const auto& s : data.samples) {
    const auto trace = network_forward<float>(model.config(), model.layout(), model.params(),
                                              network_input(s.image), config.forward_options());
    const auto& f = trace.features();
    const AffinityMatrix<float> agg =
        identity ? AffinityMatrix<float>::identity(f.height, f.width) : trace.aggregation;
    const CamStack cams = image_cams(model, s.image, s.labels, raw ? nullptr : &agg,
                                     config.pgt.cam_refine_iterations);
    save_cam_stack(fs::path(out) / (s.id + ".cam"), cams, s.id);
    if (export_affinity) save_affinity(fs::path(out) / (s.id + ".aff"), agg);
  }
  log::info("wrote CAMs for {} images to {}", data.samples.size(), out);
  return kExitOk;
}

int run_gen_pgt(const ConfigArgs& cfg, const std::string& cam_dir, const std::string& data_dir,
                const std::string& out, int stage, const std::string& ckpt) {
  const RunConfig config = cfg.load();
  require_dir(cam_dir, "CAM directory");
  require_dir(data_dir, "dataset");
  if (stage < 0) throw ValidationError("--stage must be >= 0");
  if (stage > 0 && ckpt.empty()) {
    throw ValidationError("--checkpoint is required for stage > 0 (refined saliency input)");
  }
  std::optional<Model> model;
  if (stage > 0) {
    require_file(ckpt, "checkpoint");
    model = load_checkpoint(ckpt);
  }
  const TrainSet data = load_train_set(data_dir);
  PgtSet pgt;
  pgt.stage = stage;
  std::vector<std::string> missing;
  for (const auto& s : data.samples) {
    const fs::path cam_path = fs::path(cam_dir) / (s.id + ".cam");
    if (!fs::exists(cam_path)) {
      missing.push_back(cam_path.string());
      continue;
    }
    CamStack cams = load_cam_stack(cam_path);
    if (cams.height != s.image.height || cams.width != s.image.width) {
      cams = resize_cam(cams, s.image.height, s.image.width);
    }
    pgt.seg.emplace(s.id, generate_seg_pgt(cams, s.offline_saliency, present_class_indices(s.labels),
                                           config.pgt.thresholds));
    if (stage == 0) {
      pgt.sal.emplace(s.id, update_saliency_pgt(0, s.offline_saliency, nullptr, s.image, config.crf).map);
    } else {
      const auto trace = network_forward<float>(model->config(), model->layout(), model->params(),
                                                network_input(s.image), config.forward_options());
      const auto ref = nn::resize_bilinear(trace.ref_sal, s.image.height, s.image.width);
      pgt.sal.emplace(s.id, update_saliency_pgt(stage, s.offline_saliency, &ref, s.image, config.crf).map);
    }
  }
  if (!missing.empty()) {
    std::string msg = fmt::format("CAM directory '{}' lacks {} CAM file(s):", cam_dir, missing.size());
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += "\n  " + missing[i];
    throw ValidationError(msg);
  }
  write_pgt(out, pgt);
  log::info("wrote stage-{} pseudo labels for {} images to {}", stage, data.samples.size(), out);
  return kExitOk;
}

int run_eval(const ConfigArgs& cfg, const std::string& ckpt, const std::string& data_dir,
             const std::string& preds, bool crf, const std::string& csv, int stage) {
  RunConfig config = cfg.load();
  if (crf) config.infer_crf = true;
  require_file(ckpt, "checkpoint");
  require_dir(data_dir, "evaluation set");
  const Model model = load_checkpoint(ckpt);
  const EvalSet data = load_eval_set(data_dir);
  const ConfusionMatrix conf = evaluate(model, data, infer_options(config), preds);
  const double m = miou(conf);
  const auto per_class = per_class_iou(conf);
  std::cout << fmt::format("mIoU {:.4f}\n", m);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    std::cout << fmt::format("  class {} IoU {:.4f}\n", c, per_class[c]);
  }
  if (!csv.empty()) {
    append_csv(csv, {"stage", "split", "miou"}, {std::to_string(stage), "eval", fmt::format("{:.4f}", m)});
  }
  return kExitOk;
}

int run_infer(const ConfigArgs& cfg, const std::string& ckpt, const std::string& image_path,
              const std::string& out, bool crf) {
  RunConfig config = cfg.load();
  if (crf) config.infer_crf = true;
  require_file(ckpt, "checkpoint");
  require_file(image_path, "image");
  const Model model = load_checkpoint(ckpt);
  const Image image = io::read_rgb_png(image_path);
  io::write_label_png(out, infer(model, image, infer_options(config)));
  log::info("wrote prediction to {}", out);
  return kExitOk;
}

int run_plot(const std::string& run_dir) {
  require_dir(run_dir, "run directory");
  const TrendFiles f = plot_stage_trends(run_dir);
  std::cout << f.csv.string() << "\n" << f.pgt_png.string() << "\n" << f.eval_png.string() << "\n";
  return kExitOk;
}

int report(const std::exception& e, int code) {
  log::emit(log::Level::kError, e.what());
  return code;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Weakly-supervised segmentation with cross-task affinity: data, training, "
               "pseudo labels, evaluation"};
  app.name("auxseg");
  app.require_subcommand(1);
  app.fallthrough();
  bool json_logs = false;
  bool verbose = false;
  app.add_flag("--json-logs", json_logs, "Emit one JSON object per log event on stderr");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // synth-data
  std::string synth_config, synth_out;
  std::vector<std::string> synth_set;
  int synth_n = -1, synth_size = -1;
  std::int64_t synth_seed = -1;
  bool synth_clean = false;
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic shapes dataset");
  synth->add_option("--config", synth_config, "Dataset spec JSON");
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--num-images", synth_n, "Number of images (spec key num_images)");
  synth->add_option("--image-size", synth_size, "Image side in pixels (spec key image_size)");
  synth->add_option("--seed", synth_seed, "Generator seed (spec key seed)");
  synth->add_flag("--no-corruption", synth_clean, "Saliency equals the GT foreground");
  synth->add_option("--set", synth_set, "Dotted spec override key=value (repeatable)");

  // train
  ConfigArgs train_cfg;
  std::string train_run, train_warmup, train_data, train_eval;
  std::int64_t train_seed = -1;
  int train_stages = -1;
  auto* train = app.add_subcommand("train", "Warm-up plus stage-wise training");
  train_cfg.attach(train);
  train->add_option("--run-dir", train_run, "Run output directory")->required();
  train->add_option("--train-dir", train_data, "Training set (config paths.train)");
  train->add_option("--eval-dir", train_eval, "Evaluation set (config paths.eval)");
  train->add_option("--seed", train_seed, "Seed (config seed)");
  train->add_option("--stages", train_stages, "Number of stages (config stages)");
  train->add_option("--warmup-checkpoint", train_warmup, "Reuse a warm-up checkpoint");

  // refine-cam
  ConfigArgs rc_cfg;
  std::string rc_ckpt, rc_data, rc_out;
  bool rc_raw = false, rc_identity = false, rc_aff = false;
  auto* rc = app.add_subcommand("refine-cam", "Export (affinity-refined) CAMs for a dataset");
  rc_cfg.attach(rc);
  rc->add_option("--checkpoint", rc_ckpt, "Model checkpoint")->required();
  rc->add_option("--data", rc_data, "Dataset directory")->required();
  rc->add_option("--out", rc_out, "CAM output directory")->required();
  rc->add_flag("--raw", rc_raw, "Skip affinity refinement");
  rc->add_flag("--identity", rc_identity, "Refine with the identity affinity");
  rc->add_flag("--export-affinity", rc_aff, "Also write <id>.aff affinity archives");

  // gen-pgt
  ConfigArgs gp_cfg;
  std::string gp_cams, gp_data, gp_out, gp_ckpt;
  int gp_stage = 0;
  auto* gp = app.add_subcommand("gen-pgt", "Generate pseudo labels from CAMs and saliency");
  gp_cfg.attach(gp);
  gp->add_option("--cams", gp_cams, "CAM directory from refine-cam")->required();
  gp->add_option("--data", gp_data, "Dataset directory")->required();
  gp->add_option("--out", gp_out, "Output directory (gets seg/ and sal/)")->required();
  gp->add_option("--stage", gp_stage, "Stage index s (s > 0 runs the CRF saliency update)");
  gp->add_option("--checkpoint", gp_ckpt, "Previous-stage checkpoint (needed when s > 0)");

  // eval
  ConfigArgs ev_cfg;
  std::string ev_ckpt, ev_data, ev_preds, ev_csv;
  bool ev_crf = false;
  int ev_stage = 0;
  auto* ev = app.add_subcommand("eval", "mIoU of a checkpoint on a labeled set");
  ev_cfg.attach(ev);
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
  ev->add_option("--data", ev_data, "Evaluation set directory")->required();
  ev->add_option("--preds-dir", ev_preds, "Write predicted masks here");
  ev->add_flag("--crf", ev_crf, "Dense-CRF post-processing (config infer_crf)");
  ev->add_option("--csv", ev_csv, "Append (stage, split, miou) to this CSV");
  ev->add_option("--stage", ev_stage, "Stage value for the CSV row");

  // infer
  ConfigArgs in_cfg;
  std::string in_ckpt, in_image, in_out;
  bool in_crf = false;
  auto* inf = app.add_subcommand("infer", "Segment one image");
  in_cfg.attach(inf);
  inf->add_option("--checkpoint", in_ckpt, "Model checkpoint")->required();
  inf->add_option("--image", in_image, "Input RGB PNG")->required();
  inf->add_option("--out", in_out, "Output label PNG")->required();
  inf->add_flag("--crf", in_crf, "Dense-CRF post-processing (config infer_crf)");

  // plot-metrics
  std::string pm_run;
  auto* pm = app.add_subcommand("plot-metrics", "Stage-trend charts and CSV for a run");
  pm->add_option("--run-dir", pm_run, "Run directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  log::set_json(json_logs);
  if (verbose) log::set_min_level(log::Level::kDebug);

  try {
    if (*synth) {
      std::vector<std::string> overrides;
      if (synth_n >= 0) overrides.push_back(fmt::format("num_images={}", synth_n));
      if (synth_size >= 0) overrides.push_back(fmt::format("image_size={}", synth_size));
      if (synth_seed >= 0) overrides.push_back(fmt::format("seed={}", synth_seed));
      if (synth_clean) {
        overrides.push_back("corruption.dilation_radius=0");
        overrides.push_back("corruption.blur_sigma=0");
        overrides.push_back("corruption.dropout_prob=0");
      }
      overrides.insert(overrides.end(), synth_set.begin(), synth_set.end());
      return run_synth(synth_config, synth_out, overrides);
    }
    if (*train) {
      if (!train_data.empty()) train_cfg.overrides.insert(train_cfg.overrides.begin(), "paths.train=" + json(train_data).dump());
      if (!train_eval.empty()) train_cfg.overrides.insert(train_cfg.overrides.begin(), "paths.eval=" + json(train_eval).dump());
      if (train_seed >= 0) train_cfg.overrides.push_back(fmt::format("seed={}", train_seed));
      if (train_stages >= 0) train_cfg.overrides.push_back(fmt::format("stages={}", train_stages));
      return run_train(train_cfg, train_run, train_warmup);
    }
    if (*rc) return run_refine_cam(rc_cfg, rc_ckpt, rc_data, rc_out, rc_raw, rc_identity, rc_aff);
    if (*gp) return run_gen_pgt(gp_cfg, gp_cams, gp_data, gp_out, gp_stage, gp_ckpt);
    if (*ev) return run_eval(ev_cfg, ev_ckpt, ev_data, ev_preds, ev_crf, ev_csv, ev_stage);
    if (*inf) return run_infer(in_cfg, in_ckpt, in_image, in_out, in_crf);
    if (*pm) return run_plot(pm_run);
  } catch (const Error& e) {
    return report(e, e.is_validation() ? kExitValidation : kExitRuntime);
  } catch (const std::exception& e) {
    return report(e, kExitRuntime);
  }
  return kExitValidation;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace auxseg::cli
