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

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   auxseg_acceptance --config configs/desk.json --work-dir DIR [--expect-fail N]...
//
// Criteria 1-6 and 11 are property suites; 7-10 train on a generated
// 200-image fixture (three seeds). Exit status is nonzero when any criterion
// that is not listed in --expect-fail fails, or when a listed one passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "auxseg/affinity.hpp"
#include "auxseg/archive.hpp"
#include "auxseg/cli.hpp"
#include "auxseg/crf.hpp"
#include "auxseg/log.hpp"
#include "auxseg/losses.hpp"
#include "auxseg/optim.hpp"
#include "auxseg/pipeline.hpp"
#include "auxseg/pseudo_labels.hpp"
#include "test_support.hpp"

namespace {

using namespace auxseg;
namespace fs = std::filesystem;
using testing::check_gradient;
using testing::random_map;
using testing::random_matrix;

struct Outcome {
  bool pass = false;
  std::string detail;
};

RunOptions run_options(const fs::path& dir) {
  RunOptions o;
  o.run_dir = dir;
  return o;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + fmt::format("{:.1f}", x);
  return s;
}

NonLocalParams<double> random_nonlocal(std::mt19937_64& rng, int d) {
  return {random_matrix<double>(rng, d, d, 0.5), random_matrix<double>(rng, d, d, 0.5),
          random_matrix<double>(rng, d, d, 0.5)};
}

SaParams<double> random_sa(std::mt19937_64& rng, int hidden) {
  return {random_matrix<double>(rng, 2, hidden), random_matrix<double>(rng, 1, hidden),
          random_matrix<double>(rng, hidden, 2), random_matrix<double>(rng, 1, 2)};
}

FeatureMap<float> map_from(int h, int w, std::vector<float> v) {
  FeatureMap<float> m(h, w, 1);
  for (int i = 0; i < h * w; ++i) m.data(i, 0) = v[static_cast<std::size_t>(i)];
  return m;
}

// ---- property criteria ----

Outcome affinity_invariants() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 6), ch(1, 8);
  double row = 0, wsum = 0;
  bool between = true, bounded = true;
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng), d = ch(rng);
    const auto s = nonlocal_block(random_map<double>(rng, h, w, d), random_nonlocal(rng, d)).affinity;
    const auto g = nonlocal_block(random_map<double>(rng, h, w, d), random_nonlocal(rng, d)).affinity;
    for (const auto* a : {&s, &g}) row = std::max(row, (a->data.rowwise().sum().array() - 1).abs().maxCoeff());
    const auto fused = fuse_affinities(s, g, random_sa(rng, 8));
    wsum = std::max(wsum, ((fused.weights.w1 + fused.weights.w2).array() - 1).abs().maxCoeff());
    const RowMatrix<double> lo = s.data.cwiseMin(g.data), hi = s.data.cwiseMax(g.data);
    between = between && ((fused.cross_task.data - lo).array() >= -1e-15).all() &&
              ((hi - fused.cross_task.data).array() >= -1e-15).all();
    const auto pred = random_map<double>(rng, h, w, 3);
    const auto ref = refine_map(pred, aggregation_normalize(fused.cross_task, true));
    for (int c = 0; c < 3; ++c) {
      bounded = bounded && ref.data.col(c).minCoeff() >= pred.data.col(c).minCoeff() - 1e-12 &&
                ref.data.col(c).maxCoeff() <= pred.data.col(c).maxCoeff() + 1e-12;
    }
  }
  const double secs = seconds_since(t0);
  return {row <= 1e-5 && wsum <= 1e-6 && between && bounded && secs < 10,
          fmt::format("max |rowsum-1| {:.1e}, max |w1+w2-1| {:.1e}, betweenness {}, refine bounds {}, {:.3f} s",
                      row, wsum, between ? "ok" : "violated", bounded ? "ok" : "violated", secs)};
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> dim(1, 6), ch(1, 8);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const int h = dim(rng), w = dim(rng), d = ch(rng);
    const auto f = random_map<double>(rng, h, w, d);
    const auto p = random_nonlocal(rng, d);
    const auto fast = nonlocal_block(f, p);
    const auto [aug, aff] = nonlocal_oracle(f, p);
    worst = std::max({worst, (fast.augmented.data - aug.data).cwiseAbs().maxCoeff(),
                      (fast.affinity.data - aff.data).cwiseAbs().maxCoeff()});
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 30, fmt::format("max abs diff {:.1e} over 50 cases, {:.3f} s", worst, secs)};
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(103);
  std::vector<std::pair<std::string, double>> errs;

  {
    auto f = random_map<double>(rng, 3, 3, 4);
    auto p = random_nonlocal(rng, 4);
    const auto g_aug = random_matrix<double>(rng, 9, 4);
    const auto g_aff = random_matrix<double>(rng, 9, 9);
    auto obj = [&] {
      const auto o = nonlocal_block(f, p);
      return (o.augmented.data.array() * g_aug.array()).sum() + (o.affinity.data.array() * g_aff.array()).sum();
    };
    const auto g = nonlocal_backward(f, p, nonlocal_block(f, p), g_aug, &g_aff);
    errs.emplace_back("nonlocal.input", check_gradient(f.data, g.input, obj));
    errs.emplace_back("nonlocal.q", check_gradient(p.q_proj, g.params.q_proj, obj));
    errs.emplace_back("nonlocal.k", check_gradient(p.k_proj, g.params.k_proj, obj));
    errs.emplace_back("nonlocal.v", check_gradient(p.v_proj, g.params.v_proj, obj));
  }
  {
    auto a = nonlocal_block(random_map<double>(rng, 3, 3, 4), random_nonlocal(rng, 4)).affinity;
    auto b = nonlocal_block(random_map<double>(rng, 3, 3, 4), random_nonlocal(rng, 4)).affinity;
    auto sa = random_sa(rng, 8);
    const auto up = random_matrix<double>(rng, 9, 9);
    auto obj = [&] { return (fuse_affinities(a, b, sa).cross_task.data.array() * up.array()).sum(); };
    const auto g = fuse_backward(a, b, sa, fuse_affinities(a, b, sa), up);
    errs.emplace_back("fusion.a_sal", check_gradient(a.data, g.a_sal, obj));
    errs.emplace_back("fusion.a_seg", check_gradient(b.data, g.a_seg, obj));
    errs.emplace_back("fusion.w1", check_gradient(sa.w1, g.sa.w1, obj));
    errs.emplace_back("fusion.b1", check_gradient(sa.b1, g.sa.b1, obj));
    errs.emplace_back("fusion.w2", check_gradient(sa.w2, g.sa.w2, obj));
    errs.emplace_back("fusion.b2", check_gradient(sa.b2, g.sa.b2, obj));
  }
  {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    RowMatrix<double> logits = random_matrix<double>(rng, 1, 4, 2.0);
    RowVector<double> targets(4);
    targets << 1, 0, 0, 1;
    auto f_cls = [&] { return multilabel_soft_margin(RowVector<double>(logits), targets).value; };
    errs.emplace_back("loss.cls", check_gradient(logits, multilabel_soft_margin(RowVector<double>(logits), targets).grad, f_cls));

    LabelMask sal_t(3, 3), seg_t(3, 3);
    sal_t.labels = {1, 0, 1, 1, 0, 0, 1, kIgnoreLabel, 0};
    seg_t.labels = {0, 1, 2, 3, kIgnoreLabel, 1, 0, 2, 3};
    RowMatrix<double> sal(9, 1), seg(9, 4);
    for (Eigen::Index i = 0; i < sal.size(); ++i) sal.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < seg.size(); ++i) seg.data()[i] = u(rng);
    auto f_sal = [&] { return saliency_bce(sal, sal_t).value; };
    auto f_seg = [&] { return seg_cross_entropy(seg, seg_t).value; };
    errs.emplace_back("loss.sal", check_gradient(sal, saliency_bce(sal, sal_t).grad, f_sal));
    errs.emplace_back("loss.seg", check_gradient(seg, seg_cross_entropy(seg, seg_t).grad, f_seg));
  }
  const auto worst = *std::max_element(errs.begin(), errs.end(),
                                       [](const auto& x, const auto& y) { return x.second < y.second; });
  const double secs = seconds_since(t0);
  return {worst.second < 1e-3 && secs < 120,
          fmt::format("{} parameter groups, worst rel err {:.1e} ({}), {:.3f} s", errs.size(), worst.second,
                      worst.first, secs)};
}

Outcome closed_forms() {
  LrSchedule s;
  s.max_iter = 1000;
  const double lr0 = poly_lr(s, 0), lr_max = poly_lr(s, 1000), lr_half = poly_lr(s, 500);
  RowMatrix<double> half = RowMatrix<double>::Constant(1, 1, 0.5);
  LabelMask one(1, 1);
  one.labels = {1};
  const double bce = saliency_bce(half, one).value;
  RowMatrix<double> uniform = RowMatrix<double>::Constant(1, 3, 1.0 / 3);
  const double ce = seg_cross_entropy(uniform, one).value;
  const bool ok = lr0 == 0.001 && lr_max == 0.0 && std::abs(lr_half - 5.3589e-4) <= 1e-8 &&
                  std::abs(bce - std::log(2.0)) <= 1e-9 && std::abs(ce - std::log(3.0)) <= 1e-9;
  return {ok, fmt::format("lr(0) {} lr(max) {} lr(max/2) {:.8e} bce(0.5) {:.12f} ce(uniform 3) {:.12f}", lr0, lr_max,
                          lr_half, bce, ce)};
}

Outcome saliency_branches() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<float> u(0, 1);
  FeatureMap<float> offline(8, 8, 1);
  for (int i = 0; i < 64; ++i) offline.data(i, 0) = u(rng);
  const Image img = testing::random_image(rng, 8, 8);
  const auto s0 = update_saliency_pgt(0, offline, &offline, img, CrfParams{});
  const bool stage0 = s0.map == binarize(offline) && s0.source == PgtSource::kOffline;

  const auto off = map_from(4, 4, {0.5f, 0.5f, 0.2f, 0.8f, 0.0f, 1.0f, 0.6f, 0.4f, 0.3f, 0.7f, 0.5f, 0.1f,
                                   0.9f, 0.2f, 0.45f, 0.55f});
  const auto ref = map_from(4, 4, {0.9f, 0.5f, 0.9f, 0.1f, 1.0f, 0.0f, 0.5f, 0.5f, 0.8f, 0.2f, 0.6f, 0.95f,
                                   0.0f, 0.9f, 0.6f, 0.4f});
  CrfParams p;
  p.spatial_weight = p.bilateral_weight = 0;
  const auto s1 = update_saliency_pgt(1, off, &ref, Image(4, 4, 3), p);
  const std::vector<std::uint8_t> expected = {1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 0};
  const bool stage1 = s1.map.labels == expected;
  return {stage0 && stage1, fmt::format("stage 0 equals binarized offline: {}; 4x4 zero-pairwise fixture: {}",
                                        stage0 ? "yes" : "no", stage1 ? "match" : "mismatch")};
}

CamStack cam_from(int h, int w, std::vector<float> v) {
  CamStack s;
  s.height = h;
  s.width = w;
  s.maps = RowMatrix<float>(1, h * w);
  for (int i = 0; i < h * w; ++i) s.maps(0, i) = v[static_cast<std::size_t>(i)];
  return s;
}

Outcome pgt_rules() {
  const PgtThresholds th{0.3f, 0.06f};
  const bool ex1 = generate_seg_pgt(cam_from(2, 2, {0, 0, 0, 0}), map_from(2, 2, {0, 0, 0, 0}), {0}, th).labels ==
                   std::vector<std::uint8_t>(4, 0);
  const bool ex2 = generate_seg_pgt(cam_from(1, 1, {0.9f}), map_from(1, 1, {0.8f}), {0}, th).labels[0] == 1;
  const bool ex3 =
      generate_seg_pgt(cam_from(1, 1, {0.1f}), map_from(1, 1, {0.9f}), {0}, th).labels[0] == kIgnoreLabel;

  std::mt19937_64 rng(106);
  std::uniform_real_distribution<float> u(0, 1);
  bool monotone = true;
  for (int t = 0; t < 20; ++t) {
    CamStack s;
    s.height = s.width = 8;
    s.maps = RowMatrix<float>(3, 64);
    for (Eigen::Index i = 0; i < s.maps.size(); ++i) s.maps.data()[i] = u(rng);
    FeatureMap<float> sal(8, 8, 1);
    for (int i = 0; i < 64; ++i) sal.data(i, 0) = u(rng);
    std::size_t prev = s.maps.cols() + 1;
    for (float fg = 0.05f; fg < 1.f; fg += 0.05f) {
      const auto m = generate_seg_pgt(s, sal, {0, 1, 2}, {fg, 0.06f});
      const auto fg_count = static_cast<std::size_t>(
          std::count_if(m.labels.begin(), m.labels.end(), [](auto v) { return v != 0 && v != kIgnoreLabel; }));
      monotone = monotone && fg_count <= prev;
      prev = fg_count;
    }
  }
  return {ex1 && ex2 && ex3 && monotone,
          fmt::format("examples {}/{}/{}, monotone over 20 stacks: {}", ex1 ? "ok" : "bad", ex2 ? "ok" : "bad",
                      ex3 ? "ok" : "bad", monotone ? "yes" : "no")};
}

Outcome crf_fixpoints() {
  FeatureMap<float> unary(6, 6, RowMatrix<float>::Constant(36, 3, 1.f / 3));
  const Image flat(6, 6, RowMatrix<float>::Constant(36, 3, 0.4f));
  const double d_uniform = (dense_crf(unary, flat, CrfParams{}).data.array() - 1.f / 3).abs().maxCoeff();

  std::mt19937_64 rng(111);
  std::uniform_real_distribution<float> u(0.05f, 1.f);
  FeatureMap<float> random_unary(5, 5, 3);
  for (int i = 0; i < 25; ++i) {
    for (int l = 0; l < 3; ++l) random_unary.data(i, l) = u(rng);
    random_unary.data.row(i) /= random_unary.data.row(i).sum();
  }
  CrfParams p;
  p.spatial_weight = p.bilateral_weight = 0;
  const double d_zero =
      (dense_crf(random_unary, testing::random_image(rng, 5, 5), p).data - random_unary.data).cwiseAbs().maxCoeff();
  return {d_uniform <= 1e-6 && d_zero <= 1e-6,
          fmt::format("uniform drift {:.1e}, zero-pairwise drift {:.1e}", d_uniform, d_zero)};
}

// ---- training criteria ----

struct SeedResult {
  int seed = 0;
  std::vector<double> eval;      // A, stages 0..S-1
  std::vector<double> recall;    // A PGT, stages 0..S-1
  std::vector<double> pgt_miou;  // A PGT, stages 0..S-1
  double b = 0, c = 0;           // stage-0 eval of the ablations
  fs::path run_a;
};

SeedResult run_seed(const RunConfig& base, int seed, const fs::path& root) {
  SeedResult r;
  r.seed = seed;
  RunConfig a = base;
  a.seed = static_cast<std::uint64_t>(seed);
  a.model.seed = a.seed;
  r.run_a = root / fmt::format("seed_{}", seed) / "full";
  RunOptions oa = run_options(r.run_a);
  oa.write_preds = false;
  const RunResult ra = run_training(a, oa);
  for (const auto& s : ra.stages) {
    r.eval.push_back(s.eval_miou.value());
    r.recall.push_back(s.pgt_quality.value().recall);
    r.pgt_miou.push_back(s.pgt_quality.value().miou);
  }

  // Ablations share the warm-up and stage-0 labels; only the objective changes.
  RunConfig b = a;
  b.stages = 1;
  b.affinity = AffinityMode::kNone;
  b.sal_refine_loss = b.seg_refine_loss = false;
  RunOptions ob = run_options(root / fmt::format("seed_{}", seed) / "no_affinity");
  ob.warmup_checkpoint = ra.warmup_checkpoint;
  ob.initial_pgt_dir = r.run_a / "pgt" / "stage_0";
  ob.measure_pgt = false;
  ob.write_preds = false;
  r.b = run_training(b, ob).stages.at(0).eval_miou.value();

  RunConfig c = b;
  c.loss = LossWeights{0, 0, 1};
  ob.run_dir = root / fmt::format("seed_{}", seed) / "seg_only";
  r.c = run_training(c, ob).stages.at(0).eval_miou.value();
  fmt::print("  seed {}: full eval {} | no-affinity {:.1f} | seg-only {:.1f} | PGT recall {} mIoU {}\n", seed,
             join(r.eval), r.b, r.c, join(r.recall), join(r.pgt_miou));
  std::fflush(stdout);
  return r;
}

std::vector<double> column(const std::vector<SeedResult>& rs, const std::function<double(const SeedResult&)>& f) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(f(r));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string config_path, work_dir, synth_path;
  std::vector<int> expect_fail;
  std::vector<int> seeds = {0, 1, 2};
  app.add_option("--config", config_path, "Run config used for the training criteria")->required();
  app.add_option("--synth-config", synth_path, "Fixture spec (default: synth.json next to --config)");
  app.add_option("--work-dir", work_dir, "Scratch directory (recreated)")->required();
  app.add_option("--expect-fail", expect_fail, "Criterion known to fail (repeatable)");
  app.add_option("--seeds", seeds, "Seeds for the training criteria");
  CLI11_PARSE(app, argc, argv);
  if (synth_path.empty()) synth_path = (fs::path(config_path).parent_path() / "synth.json").string();

  log::set_min_level(log::Level::kWarn);
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  int unexpected = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    const bool known = expected.count(id) > 0;
    fmt::print("{} {:>2} {}: {}{}\n", o.pass ? "PASS" : "FAIL", id, name, o.detail,
               known ? (o.pass ? "  [expected FAIL, got PASS]" : "  [known failure]") : "");
    std::fflush(stdout);
    if (o.pass == known) ++unexpected;
  };

  report(1, "affinity invariants", affinity_invariants());
  report(2, "non-local oracle equivalence", oracle_equivalence());
  report(3, "gradient checks", gradient_checks());
  report(4, "closed-form values", closed_forms());
  report(5, "saliency label branches", saliency_branches());
  report(6, "segmentation label rule", pgt_rules());

  // Fixture and training criteria.
  const fs::path work(work_dir);
  fs::remove_all(work);
  fs::create_directories(work);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string train_dir = (work / "data" / "train").string();
  const std::string eval_dir = (work / "data" / "eval").string();
  if (cli::dispatch({"synth-data", "--config", synth_path, "--out", train_dir}) != 0 ||
      cli::dispatch({"synth-data", "--config", synth_path, "--out", eval_dir, "--seed", "2", "--num-images", "50"}) !=
          0) {
    fmt::print(stderr, "fixture generation failed\n");
    return 2;
  }
  const RunConfig base = load_run_config(
      config_path, {"paths.train=" + nlohmann::json(train_dir).dump(), "paths.eval=" + nlohmann::json(eval_dir).dump()});
  fmt::print("  training: {} seeds x (full model, {} stages; no-affinity; seg-only)\n", seeds.size(), base.stages);

  std::vector<SeedResult> results;
  for (int seed : seeds) results.push_back(run_seed(base, seed, work / "runs"));
  const double train_secs = seconds_since(t0);

  const auto a0 = column(results, [](const auto& r) { return r.eval.at(0); });
  const auto bs = column(results, [](const auto& r) { return r.b; });
  const auto cs = column(results, [](const auto& r) { return r.c; });

  {
    const double margin = median(bs) - median(cs);
    report(7, "multi-task vs seg-only (median margin >= 2)",
           {margin >= 2.0 && train_secs < 90 * 60,
            fmt::format("seg+cls+sal {} vs seg-only {}, margin {:+.2f}, training {:.0f} s", join(bs), join(cs),
                        margin, train_secs)});
    fmt::print("  info: full model {} vs seg-only {}, margin {:+.2f}\n", join(a0), join(cs), median(a0) - median(cs));
  }
  {
    const double margin = median(a0) - median(bs);
    report(8, "affinity refinement on vs off (median margin >= 1)",
           {margin >= 1.0, fmt::format("on {} vs off {}, margin {:+.2f}", join(a0), join(bs), margin)});
  }
  {
    const int stages = base.stages;
    std::vector<double> ev, rec, pm;
    for (int s = 0; s < stages; ++s) {
      ev.push_back(median(column(results, [s](const auto& r) { return r.eval.at(static_cast<std::size_t>(s)); })));
      rec.push_back(median(column(results, [s](const auto& r) { return r.recall.at(static_cast<std::size_t>(s)); })));
      pm.push_back(median(column(results, [s](const auto& r) { return r.pgt_miou.at(static_cast<std::size_t>(s)); })));
    }
    bool ok = stages >= 3 && rec[1] >= rec[0] && pm[1] >= pm[0];
    for (int s = 1; s < std::min(stages, 3); ++s) ok = ok && ev[static_cast<std::size_t>(s)] >= ev[static_cast<std::size_t>(s) - 1];
    report(9, "stage-wise trend",
           {ok, fmt::format("median PGT recall {}, PGT mIoU {}, eval mIoU {}", join(rec), join(pm), join(ev))});
  }
  {
    const SeedResult& first = results.front();
    RunConfig a = base;
    a.seed = a.model.seed = static_cast<std::uint64_t>(first.seed);
    const fs::path rerun = work / "runs" / "determinism";
    RunOptions o = run_options(rerun);
    o.write_preds = false;
    const RunResult rr = run_training(a, o);
    const fs::path final_a = first.run_a / "checkpoints" / fmt::format("stage_{}.ckpt", base.stages - 1);
    bool same = read_file(final_a) == read_file(rr.final_checkpoint);
    std::string diff = same ? "" : " checkpoint";
    for (const char* csv : {"train_log.csv", "eval.csv", "pgt.csv"}) {
      if (read_file(first.run_a / "metrics" / csv) != read_file(rerun / "metrics" / csv)) {
        same = false;
        diff += std::string(" ") + csv;
      }
    }
    report(10, "determinism",
           {same, same ? fmt::format("seed {} rerun: final checkpoint and metrics CSVs byte-identical", first.seed)
                       : "differs:" + diff});
  }
  report(11, "CRF fixpoints", crf_fixpoints());

  fmt::print("{} unexpected result(s)\n", unexpected);
  return unexpected == 0 ? 0 : 1;
}
