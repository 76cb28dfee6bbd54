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

#include <gtest/gtest.h>

#include "auxseg/affinity.hpp"
#include "auxseg/errors.hpp"
#include "test_support.hpp"

namespace auxseg {
namespace {

using testing::check_gradient;
using testing::random_map;
using testing::random_matrix;

template <typename T>
NonLocalParams<T> random_nonlocal(std::mt19937_64& rng, int d, double scale = 0.5) {
  return {random_matrix<T>(rng, d, d, scale), random_matrix<T>(rng, d, d, scale),
          random_matrix<T>(rng, d, d, scale)};
}

template <typename T>
SaParams<T> random_sa(std::mt19937_64& rng, int hidden) {
  return {random_matrix<T>(rng, 2, hidden), random_matrix<T>(rng, 1, hidden),
          random_matrix<T>(rng, hidden, 2), random_matrix<T>(rng, 1, 2)};
}

TEST(NonLocal, SingletonAffinityIsOne) {
  std::mt19937_64 rng(0);
  const auto out = nonlocal_block(random_map<double>(rng, 1, 1, 4), random_nonlocal<double>(rng, 4));
  ASSERT_EQ(out.affinity.size(), 1);
  EXPECT_DOUBLE_EQ(out.affinity.data(0, 0), 1.0);
}

TEST(NonLocal, SharedFeatureVectorGivesUniformRows) {
  std::mt19937_64 rng(1);
  RowMatrix<double> row = random_matrix<double>(rng, 1, 5);
  FeatureMap<double> f(3, 4, RowMatrix<double>(row.replicate(12, 1)));
  const auto out = nonlocal_block(f, random_nonlocal<double>(rng, 5));
  EXPECT_LT((out.affinity.data.array() - 1.0 / 12).abs().maxCoeff(), 1e-12);
}

TEST(NonLocal, ZeroValueProjectionIsResidualIdentity) {
  std::mt19937_64 rng(2);
  const auto f = random_map<double>(rng, 3, 3, 4);
  auto p = random_nonlocal<double>(rng, 4);
  p.v_proj.setZero();
  EXPECT_TRUE(nonlocal_block(f, p).augmented.data == f.data);
  EXPECT_TRUE(nonlocal_oracle(f, p).first.data == f.data);
}

TEST(NonLocal, HandSoftmaxTwoPositions) {
  // Features e1, e2 with Q = I and K chosen so Q K^T = [[0, ln3], [0, 0]].
  FeatureMap<double> f(1, 2, 2);
  f.data << 1, 0, 0, 1;
  NonLocalParams<double> p{RowMatrix<double>::Identity(2, 2), RowMatrix<double>::Zero(2, 2),
                           RowMatrix<double>::Zero(2, 2)};
  p.k_proj(1, 0) = std::log(3.0);  // k1 = (ln 3, 0), so q0 . k1 = ln 3
  const auto out = nonlocal_block(f, p);
  EXPECT_NEAR(out.affinity.data(0, 0), 0.25, 1e-12);
  EXPECT_NEAR(out.affinity.data(0, 1), 0.75, 1e-12);
  EXPECT_NEAR(out.affinity.data(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(out.affinity.data(1, 1), 0.5, 1e-12);
  EXPECT_EQ(out.affinity.normalization, AffinityNorm::kRowStochastic);
}

TEST(NonLocal, NoTemperatureScaling) {
  // Raw dot products: scaling Q by 2 squares the odds ratio.
  FeatureMap<double> f(1, 2, 1);
  f.data << 1, 0;
  NonLocalParams<double> p{RowMatrix<double>::Constant(1, 1, 2.0), RowMatrix<double>::Constant(1, 1, 1.0),
                           RowMatrix<double>::Zero(1, 1)};
  const auto out = nonlocal_block(f, p);
  EXPECT_NEAR(out.affinity.data(0, 0) / out.affinity.data(0, 1), std::exp(2.0), 1e-9);
}

TEST(NonLocal, NonFiniteProjectionIsNumericError) {
  std::mt19937_64 rng(3);
  auto p = random_nonlocal<double>(rng, 3);
  p.q_proj(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(nonlocal_block(random_map<double>(rng, 2, 2, 3), p), NumericError);
}

TEST(NonLocal, MatchesOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 6), ch(1, 8);
  for (int i = 0; i < 50; ++i) {
    const int h = dim(rng), w = dim(rng), d = ch(rng);
    const auto f = random_map<double>(rng, h, w, d);
    const auto p = random_nonlocal<double>(rng, d);
    const auto fast = nonlocal_block(f, p);
    const auto [aug, aff] = nonlocal_oracle(f, p);
    EXPECT_LT((fast.augmented.data - aug.data).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((fast.affinity.data - aff.data).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(NonLocal, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  auto f = random_map<double>(rng, 3, 3, 4);
  auto p = random_nonlocal<double>(rng, 4);
  const auto g_aug = random_matrix<double>(rng, 9, 4);
  const auto g_aff = random_matrix<double>(rng, 9, 9);
  auto objective = [&] {
    const auto o = nonlocal_block(f, p);
    return (o.augmented.data.array() * g_aug.array()).sum() +
           (o.affinity.data.array() * g_aff.array()).sum();
  };
  const auto fwd = nonlocal_block(f, p);
  const auto g = nonlocal_backward(f, p, fwd, g_aug, &g_aff);
  EXPECT_LT(check_gradient(f.data, g.input, objective), 1e-3);
  EXPECT_LT(check_gradient(p.q_proj, g.params.q_proj, objective), 1e-3);
  EXPECT_LT(check_gradient(p.k_proj, g.params.k_proj, objective), 1e-3);
  EXPECT_LT(check_gradient(p.v_proj, g.params.v_proj, objective), 1e-3);
}

AffinityMatrix<double> random_affinity(std::mt19937_64& rng, int h, int w, int d) {
  return nonlocal_block(random_map<double>(rng, h, w, d), random_nonlocal<double>(rng, d)).affinity;
}

TEST(Fusion, EqualInputsPassThrough) {
  std::mt19937_64 rng(4);
  const auto a = random_affinity(rng, 3, 3, 3);
  const auto out = fuse_affinities(a, a, random_sa<double>(rng, 8));
  EXPECT_LT((out.cross_task.data - a.data).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fusion, SaturatedFirstWeightSelectsSaliency) {
  std::mt19937_64 rng(5);
  const auto a = random_affinity(rng, 2, 3, 3);
  const auto b = random_affinity(rng, 2, 3, 3);
  SaParams<double> sa = random_sa<double>(rng, 8);
  sa.w2.setZero();
  sa.b2 << 50, -50;
  const auto out = fuse_affinities(a, b, sa);
  EXPECT_LT((out.weights.w1.array() - 1).abs().maxCoeff(), 1e-15);
  EXPECT_LT((out.cross_task.data - a.data).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fusion, ZeroedSaGivesMean) {
  std::mt19937_64 rng(6);
  const auto a = random_affinity(rng, 3, 2, 2);
  const auto b = random_affinity(rng, 3, 2, 2);
  SaParams<double> sa{RowMatrix<double>::Zero(2, 8), RowMatrix<double>::Zero(1, 8),
                      RowMatrix<double>::Zero(8, 2), RowMatrix<double>::Zero(1, 2)};
  const auto out = fuse_affinities(a, b, sa);
  EXPECT_LT((out.cross_task.data - 0.5 * (a.data + b.data)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fusion, MismatchedInputsAreShapeError) {
  std::mt19937_64 rng(7);
  EXPECT_THROW(fuse_affinities(random_affinity(rng, 2, 2, 2), random_affinity(rng, 3, 2, 2),
                               random_sa<double>(rng, 8)),
               ShapeError);
}

TEST(Fusion, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(22);
  auto a = random_affinity(rng, 3, 3, 4);
  auto b = random_affinity(rng, 3, 3, 4);
  auto sa = random_sa<double>(rng, 8);
  const auto up = random_matrix<double>(rng, 9, 9);
  auto objective = [&] { return (fuse_affinities(a, b, sa).cross_task.data.array() * up.array()).sum(); };
  const auto fwd = fuse_affinities(a, b, sa);
  const auto g = fuse_backward(a, b, sa, fwd, up);
  EXPECT_LT(check_gradient(a.data, g.a_sal, objective), 1e-3);
  EXPECT_LT(check_gradient(b.data, g.a_seg, objective), 1e-3);
  EXPECT_LT(check_gradient(sa.w1, g.sa.w1, objective), 1e-3);
  EXPECT_LT(check_gradient(sa.b1, g.sa.b1, objective), 1e-3);
  EXPECT_LT(check_gradient(sa.w2, g.sa.w2, objective), 1e-3);
  EXPECT_LT(check_gradient(sa.b2, g.sa.b2, objective), 1e-3);
}

TEST(AggregationNormalize, HandRowDivision) {
  AffinityMatrix<double> a{RowMatrix<double>(2, 2), 1, 2, AffinityNorm::kRaw};
  a.data << 1, 3, 2, 2;
  const auto out = aggregation_normalize(a, false);
  EXPECT_DOUBLE_EQ(out.data(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(out.data(0, 1), 0.75);
  EXPECT_DOUBLE_EQ(out.data(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.data(1, 1), 0.5);
  EXPECT_EQ(out.normalization, AffinityNorm::kAggregation);
}

TEST(AggregationNormalize, RowStochasticIsFixpoint) {
  std::mt19937_64 rng(8);
  const auto a = random_affinity(rng, 3, 3, 3);
  EXPECT_LT((aggregation_normalize(a, false).data - a.data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AggregationNormalize, SymmetricTransposeIsFixpoint) {
  AffinityMatrix<double> a{RowMatrix<double>(3, 3), 1, 3, AffinityNorm::kRowStochastic};
  a.data << 0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5;
  EXPECT_LT((aggregation_normalize(a, true).data - a.data).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AggregationNormalize, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  for (const bool transpose : {false, true}) {
    auto a = random_affinity(rng, 2, 3, 3);
    const auto up = random_matrix<double>(rng, 6, 6);
    auto objective = [&] { return (aggregation_normalize(a, transpose).data.array() * up.array()).sum(); };
    const auto g = aggregation_normalize_backward(a, transpose, up);
    EXPECT_LT(check_gradient(a.data, g, objective), 1e-3) << "transpose=" << transpose;
  }
}

TEST(RefineMap, HandMatrixVectorProduct) {
  AffinityMatrix<double> a{RowMatrix<double>(2, 2), 1, 2, AffinityNorm::kAggregation};
  a.data << 0.75, 0.25, 0.5, 0.5;
  RowMatrix<double> p(2, 1);
  p << 0.8, 0.2;
  const auto out = refine_map(p, a);
  EXPECT_NEAR(out(0, 0), 0.65, 1e-15);
  EXPECT_NEAR(out(1, 0), 0.5, 1e-15);
}

TEST(RefineMap, IdentityAndUniform) {
  std::mt19937_64 rng(9);
  const auto p = random_map<double>(rng, 3, 4, 2);
  EXPECT_TRUE(refine_map(p, AffinityMatrix<double>::identity(3, 4)).data == p.data);
  const auto u = refine_map(p, AffinityMatrix<double>::uniform(3, 4));
  for (int c = 0; c < 2; ++c) {
    EXPECT_LT((u.data.col(c).array() - p.data.col(c).mean()).abs().maxCoeff(), 1e-12);
  }
}

TEST(RefineMap, ShapeMismatchIsError) {
  std::mt19937_64 rng(10);
  EXPECT_THROW(refine_map(random_map<double>(rng, 3, 3, 1), AffinityMatrix<double>::identity(2, 2)),
               ShapeError);
}

// The randomized invariant suite: row-stochastic affinities, partition of
// unity, betweenness and refinement bounds.
TEST(AffinityInvariants, RandomInputs) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> dim(1, 6), ch(1, 8);
  for (int i = 0; i < 100; ++i) {
    const int h = dim(rng), w = dim(rng), d = ch(rng);
    const auto f1 = random_map<double>(rng, h, w, d);
    const auto f2 = random_map<double>(rng, h, w, d);
    const auto s = nonlocal_block(f1, random_nonlocal<double>(rng, d)).affinity;
    const auto g = nonlocal_block(f2, random_nonlocal<double>(rng, d)).affinity;
    for (const auto* a : {&s, &g}) {
      EXPECT_LT((a->data.rowwise().sum().array() - 1).abs().maxCoeff(), 1e-5);
      EXPECT_GE(a->data.minCoeff(), 0.0);
      EXPECT_LE(a->data.maxCoeff(), 1.0);
    }
    const auto fused = fuse_affinities(s, g, random_sa<double>(rng, 8));
    EXPECT_LT(((fused.weights.w1 + fused.weights.w2).array() - 1).abs().maxCoeff(), 1e-6);
    const RowMatrix<double> lo = s.data.cwiseMin(g.data), hi = s.data.cwiseMax(g.data);
    EXPECT_TRUE(((fused.cross_task.data - lo).array() >= -1e-15).all());
    EXPECT_TRUE(((hi - fused.cross_task.data).array() >= -1e-15).all());

    const auto agg = aggregation_normalize(fused.cross_task, true);
    const auto pred = random_map<double>(rng, h, w, 3);
    const auto ref = refine_map(pred, agg);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(ref.data.col(c).minCoeff(), pred.data.col(c).minCoeff() - 1e-12);
      EXPECT_LE(ref.data.col(c).maxCoeff(), pred.data.col(c).maxCoeff() + 1e-12);
    }
  }
}

}  // namespace
}  // namespace auxseg
