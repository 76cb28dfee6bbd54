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
#include <vector>

#include "auxseg/affinity.hpp"

namespace auxseg {

std::pair<FeatureMap<double>, AffinityMatrix<double>> nonlocal_oracle(
    const FeatureMap<double>& features, const NonLocalParams<double>& params) {
  const int n = features.pixels();
  const int d = features.channels();
  std::vector<double> q(n * d, 0.0), k(n * d, 0.0), v(n * d, 0.0);
  for (int p = 0; p < n; ++p) {
    for (int out = 0; out < d; ++out) {
      for (int in = 0; in < d; ++in) {
        const double f = features.data(p, in);
        q[p * d + out] += f * params.q_proj(in, out);
        k[p * d + out] += f * params.k_proj(in, out);
        v[p * d + out] += f * params.v_proj(in, out);
      }
    }
  }

  AffinityMatrix<double> affinity;
  affinity.height = features.height;
  affinity.width = features.width;
  affinity.normalization = AffinityNorm::kRowStochastic;
  affinity.data.resize(n, n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> dots(n, 0.0);
    double peak = -INFINITY;
    for (int j = 0; j < n; ++j) {
      for (int c = 0; c < d; ++c) dots[j] += q[i * d + c] * k[j * d + c];
      peak = std::max(peak, dots[j]);
    }
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += std::exp(dots[j] - peak);
    for (int j = 0; j < n; ++j) affinity.data(i, j) = std::exp(dots[j] - peak) / total;
  }

  FeatureMap<double> augmented(features.height, features.width, d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += affinity.data(i, j) * v[j * d + c];
      augmented.data(i, c) = features.data(i, c) + acc;
    }
  }
  return {std::move(augmented), std::move(affinity)};
}

}  // namespace auxseg
