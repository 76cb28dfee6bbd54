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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "auxseg/archive.hpp"
#include "auxseg/cli.hpp"
#include "auxseg/image_io.hpp"
#include "auxseg/pipeline.hpp"
#include "auxseg/pseudo_labels.hpp"
#include "test_support.hpp"

// End-to-end checks on a tiny fixture (8 images, 32 px, small widths).
namespace auxseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir;
    SynthSpec spec;
    spec.num_images = 8;
    spec.image_size = 32;
    spec.seed = 11;
    generate(spec, *dir_ / "train");
    spec.num_images = 4;
    spec.seed = 12;
    generate(spec, *dir_ / "eval");
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static RunConfig tiny_config() {
    RunConfig c;
    c.stages = 2;
    c.warmup_epochs = 2;
    c.stage_epochs = 1;
    c.batch_size = 3;
    c.crop = 32;
    c.model.backbone_depth = 3;
    c.model.backbone_width = 8;
    c.model.head_width = 4;
    c.model.stride = 4;
    c.model.fusion_hidden = 4;
    c.optim.base_lr = 0.01;
    c.optim.warmup_lr = 0.03;
    c.paths.train = (*dir_ / "train").string();
    c.paths.eval = (*dir_ / "eval").string();
    c.validate();
    return c;
  }

  static fs::path root() { return dir_->path(); }

  static testing::TempDir* dir_;
};

testing::TempDir* Pipeline::dir_ = nullptr;

RunOptions run_options(const fs::path& dir) {
  RunOptions o;
  o.run_dir = dir;
  return o;
}

bool same_params(const ParamSet<float>& a, const ParamSet<float>& b, const std::vector<int>& which) {
  for (int i : which) {
    if (!(a.value(i) == b.value(i))) return false;
  }
  return true;
}

TEST_F(Pipeline, WarmupTouchesOnlyBackboneAndClassifier) {
  RunConfig c = tiny_config();
  c.warmup_epochs = 8;
  const TrainSet data = load_train_set(c.paths.train);
  const Model init = Model::build(c.model);
  TrainStats stats;
  const Model warm = warmup_classifier(c, data, init, nullptr, &stats);

  EXPECT_TRUE(same_params(warm.params(), init.params(), warm.layout().saliency_head_params()));
  EXPECT_FALSE(same_params(warm.params(), init.params(), {warm.layout().classifier.weight}));

  EXPECT_EQ(stats.iterations, c.warmup_epochs * iterations_per_epoch(8, c.batch_size));
  EXPECT_EQ(iterations_per_epoch(8, 3), 3);
  ASSERT_EQ(stats.epoch_totals.size(), 8u);
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  EXPECT_LT(mean(stats.epoch_totals.back()), mean(stats.epoch_totals.front()));
}

TEST_F(Pipeline, WarmupIsBitwiseReproducible) {
  const RunConfig c = tiny_config();
  const TrainSet data = load_train_set(c.paths.train);
  TrainLog log_a, log_b;
  const Model a = warmup_classifier(c, data, &log_a);
  const Model b = warmup_classifier(c, data, &log_b);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_TRUE(a.params()[i].value == b.params()[i].value) << a.params()[i].name;
  }
  ASSERT_EQ(log_a.rows().size(), log_b.rows().size());
  for (std::size_t i = 0; i < log_a.rows().size(); ++i) {
    EXPECT_EQ(log_a.rows()[i].loss.total, log_b.rows()[i].loss.total);
  }
}

TEST_F(Pipeline, IdentityRefreshMatchesUnrefinedLabels) {
  const RunConfig c = tiny_config();
  const TrainSet data = load_train_set(c.paths.train);
  const Model warm = warmup_classifier(c, data);
  const PgtSet pgt = refresh_labels(0, c, warm, data, /*force_identity=*/true);
  EXPECT_EQ(pgt.stage, 1);
  ASSERT_EQ(pgt.seg.size(), data.samples.size());
  for (const auto& s : data.samples) {
    const CamStack cams = image_cams(warm, s.image, s.labels, nullptr, 0);
    const LabelMask expected =
        generate_seg_pgt(cams, s.offline_saliency, present_class_indices(s.labels), c.pgt.thresholds);
    EXPECT_EQ(pgt.seg.at(s.id), expected) << s.id;

    // Labels only ever name classes present in the image.
    for (int v : pgt.seg.at(s.id).labels) {
      if (v == 0 || v == kIgnoreLabel) continue;
      EXPECT_TRUE(std::find(s.labels.begin(), s.labels.end(), v) != s.labels.end()) << s.id << " " << v;
    }
    for (int v : pgt.sal.at(s.id).labels) EXPECT_TRUE(v == 0 || v == 1);
  }
}

TEST_F(Pipeline, RunProducesAlternatingManifestAndMetrics) {
  const RunConfig c = tiny_config();
  const fs::path run = root() / "run_full";
  const RunResult r = run_training(c, run_options(run));
  ASSERT_EQ(r.stages.size(), 2u);

  const json manifest = json::parse(read_file(run / "manifest.json"));
  std::vector<std::string> kinds;
  for (const auto& e : manifest.at("events")) kinds.push_back(e.at("event"));
  EXPECT_EQ(kinds, (std::vector<std::string>{"start", "warmup", "pgt", "train", "refresh", "train", "done"}));

  for (const auto& s : r.stages) {
    EXPECT_TRUE(fs::exists(s.checkpoint));
    ASSERT_TRUE(s.eval_miou.has_value());
    EXPECT_GE(*s.eval_miou, 0.0);
    EXPECT_LE(*s.eval_miou, 100.0);
    ASSERT_TRUE(s.pgt_quality.has_value());
  }
  EXPECT_TRUE(fs::exists(run / "metrics" / "eval.csv"));
  EXPECT_TRUE(fs::exists(run / "metrics" / "pgt.csv"));
  EXPECT_TRUE(fs::exists(run / "config.json"));
  int preds = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(run / "preds")) ++preds;
  EXPECT_EQ(preds, 4);

  // Stage-0 saliency labels are the binarized offline maps, byte for byte.
  const TrainSet data = load_train_set(c.paths.train);
  const PgtSet stage0 = read_pgt(run / "pgt" / "stage_0", data, 0);
  for (const auto& s : data.samples) EXPECT_EQ(stage0.sal.at(s.id), binarize(s.offline_saliency)) << s.id;

  // Reusing the warm-up and stage-0 labels reproduces stage 0 exactly.
  RunConfig one = c;
  one.stages = 1;
  RunOptions reuse = run_options(root() / "run_reuse");
  reuse.warmup_checkpoint = r.warmup_checkpoint;
  reuse.initial_pgt_dir = run / "pgt" / "stage_0";
  reuse.evaluate = false;
  reuse.measure_pgt = false;
  const RunResult again = run_training(one, reuse);
  EXPECT_EQ(read_file(again.stages.at(0).checkpoint), read_file(r.stages.at(0).checkpoint));
}

TEST_F(Pipeline, TrainingNeverReadsGroundTruth) {
  RunConfig c = tiny_config();
  c.stages = 2;
  RunOptions o = run_options(root() / "run_nogt");
  o.evaluate = false;
  o.measure_pgt = false;
  const std::size_t before = gt_mask_load_count();
  run_training(c, o);
  EXPECT_EQ(gt_mask_load_count(), before);
}

TEST_F(Pipeline, InferenceIsDeterministicAndCrfIsOptional) {
  const RunConfig c = tiny_config();
  const TrainSet data = load_train_set(c.paths.train);
  Model m = warmup_classifier(c, data);
  const PgtSet pgt = initial_pgt(c, m, data);
  m = run_stage(0, c, data, pgt, std::move(m), nullptr, nullptr, 4);
  const Image& img = data.samples.front().image;

  InferOptions o = infer_options(c);
  ASSERT_FALSE(o.crf);
  const FeatureMap<float> probs = infer_probs(m, img, o);
  EXPECT_EQ(infer(m, img, o), argmax_labels(probs));
  EXPECT_EQ(infer(m, img, o), infer(m, img, o));
  for (int i = 0; i < probs.pixels(); ++i) EXPECT_NEAR(probs.data.row(i).sum(), 1.0f, 1e-4f);

  o.crf = true;
  const LabelMask with_crf = infer(m, img, o);
  EXPECT_EQ(with_crf.height, img.height);
  EXPECT_EQ(with_crf, infer(m, img, o));

  // Sizes that do not divide the stride are padded and cropped back.
  Image odd(30, 27, 3);
  odd.data = img.data.topRows(30 * 27);
  o.crf = false;
  const LabelMask om = infer(m, odd, o);
  EXPECT_EQ(om.height, 30);
  EXPECT_EQ(om.width, 27);
}

TEST_F(Pipeline, CliEndToEnd) {
  const RunConfig c = tiny_config();
  const fs::path cfg = root() / "cli_config.json";
  json j = to_json(c);
  j["stages"] = 1;
  write_file_atomic(cfg, j.dump(2));
  const fs::path run = root() / "cli_run";

  ::testing::internal::CaptureStderr();
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(cli::dispatch({"train", "--config", cfg.string(), "--run-dir", run.string()}), cli::kExitOk);
  const fs::path ckpt = run / "checkpoints" / "stage_0.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));

  const fs::path cams = root() / "cli_cams";
  EXPECT_EQ(cli::dispatch({"refine-cam", "--config", cfg.string(), "--checkpoint", ckpt.string(), "--data",
                           c.paths.train, "--out", cams.string()}),
            cli::kExitOk);
  const fs::path pgt = root() / "cli_pgt";
  EXPECT_EQ(cli::dispatch({"gen-pgt", "--config", cfg.string(), "--cams", cams.string(), "--data",
                           c.paths.train, "--out", pgt.string(), "--stage", "1", "--checkpoint",
                           ckpt.string()}),
            cli::kExitOk);
  const fs::path pred = root() / "cli_pred.png";
  EXPECT_EQ(cli::dispatch({"infer", "--config", cfg.string(), "--checkpoint", ckpt.string(), "--image",
                           (fs::path(c.paths.eval) / "images" / "img_00000.png").string(), "--out",
                           pred.string()}),
            cli::kExitOk);
  EXPECT_EQ(cli::dispatch({"eval", "--config", cfg.string(), "--checkpoint", ckpt.string(), "--data",
                           c.paths.eval}),
            cli::kExitOk);
  EXPECT_EQ(cli::dispatch({"plot-metrics", "--run-dir", run.string()}), cli::kExitOk);
  ::testing::internal::GetCapturedStdout();
  ::testing::internal::GetCapturedStderr();

  const TrainSet data = load_train_set(c.paths.train);
  const PgtSet labels = read_pgt(pgt, data, 1);
  EXPECT_EQ(labels.seg.size(), data.samples.size());
  EXPECT_EQ(io::read_label_png(pred).height, 32);
}

}  // namespace
}  // namespace auxseg
