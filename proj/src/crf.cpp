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

#include "auxseg/crf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "auxseg/errors.hpp"
#include "auxseg/log.hpp"
#include "auxseg/nn.hpp"

namespace auxseg {
namespace {

// Above this many pixels the kernel is recomputed per iteration in row blocks
// instead of being cached (N^2 floats).
constexpr int kMaxCachedPixels = 8192;
constexpr int kBlockRows = 256;
constexpr float kProbFloor = 1e-10f;

struct KernelInputs {
  Eigen::ArrayXf x, y, r, g, b;
  float spatial_coef, bilateral_xy_coef, bilateral_rgb_coef;
  float spatial_weight, bilateral_weight;
};

// Rows [begin, begin + out.rows()) of the pairwise kernel, zero diagonal.
void kernel_rows(const KernelInputs& in, int begin, RowMatrix<float>& out) {
  const Eigen::Index n = in.x.size();
  Eigen::ArrayXf d2(n), c2(n);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const Eigen::Index i = begin + r;
    d2 = (in.x - in.x(i)).square() + (in.y - in.y(i)).square();
    c2 = (in.r - in.r(i)).square() + (in.g - in.g(i)).square() + (in.b - in.b(i)).square();
    Eigen::ArrayXf k = Eigen::ArrayXf::Zero(n);
    if (in.spatial_weight != 0.0f) k += in.spatial_weight * (-d2 * in.spatial_coef).exp();
    if (in.bilateral_weight != 0.0f) {
      k += in.bilateral_weight * (-d2 * in.bilateral_xy_coef - c2 * in.bilateral_rgb_coef).exp();
    }
    k(i) = 0.0f;
    out.row(r) = k.matrix().transpose();
  }
}

}  // namespace

void CrfParams::validate() const {
  std::vector<std::string> problems;
  if (iterations < 1) problems.push_back(fmt::format("iterations={} must be >= 1", iterations));
  if (!(spatial_sigma > 0)) problems.push_back("spatial_sigma must be positive");
  if (!(bilateral_sigma_xy > 0)) problems.push_back("bilateral_sigma_xy must be positive");
  if (!(bilateral_sigma_rgb > 0)) problems.push_back("bilateral_sigma_rgb must be positive");
  if (!(spatial_weight >= 0)) problems.push_back("spatial_weight must be non-negative");
  if (!(bilateral_weight >= 0)) problems.push_back("bilateral_weight must be non-negative");
  if (!(potts_compat > 0)) problems.push_back("potts_compat must be positive");
  if (reference_size < 0) problems.push_back("reference_size must be non-negative");
  if (!problems.empty()) {
    std::string msg = "invalid CRF parameters:";
    for (const auto& p : problems) msg += "\n  crf." + p;
    throw ConfigError(msg);
  }
}

double CrfParams::effective_bilateral_sigma_xy(int height, int width) const {
  if (reference_size == 0) return bilateral_sigma_xy;
  return bilateral_sigma_xy * std::min(height, width) / reference_size;
}

FeatureMap<float> dense_crf(const FeatureMap<float>& unary_probs, const Image& image,
                            const CrfParams& params) {
  params.validate();
  const int labels = unary_probs.channels();
  if (labels < 2) throw DomainError(fmt::format("dense CRF needs at least 2 labels, got {}", labels));
  if (image.height != unary_probs.height || image.width != unary_probs.width ||
      image.channels() != 3) {
    throw ShapeError("CRF image and unary grids differ");
  }
  const int n = unary_probs.pixels();

  RowMatrix<float> probs = unary_probs.data.cwiseMax(0.0f);
  const Eigen::VectorXf sums = probs.rowwise().sum();
  if (((sums.array() - 1.0f).abs() > 1e-4f).any()) {
    log::warn("dense_crf: unary distributions not normalized; renormalizing");
  }
  for (int i = 0; i < n; ++i) {
    if (sums(i) > 0) {
      probs.row(i) /= sums(i);
    } else {
      probs.row(i).setConstant(1.0f / labels);
    }
  }
  const RowMatrix<float> log_unary = probs.cwiseMax(kProbFloor).array().log().matrix();

  KernelInputs in;
  in.x.resize(n);
  in.y.resize(n);
  in.r.resize(n);
  in.g.resize(n);
  in.b.resize(n);
  for (int yy = 0; yy < image.height; ++yy) {
    for (int xx = 0; xx < image.width; ++xx) {
      const int i = yy * image.width + xx;
      in.x(i) = static_cast<float>(xx);
      in.y(i) = static_cast<float>(yy);
      in.r(i) = image.data(i, 0);
      in.g(i) = image.data(i, 1);
      in.b(i) = image.data(i, 2);
    }
  }
  const double sxy = params.effective_bilateral_sigma_xy(image.height, image.width);
  in.spatial_coef = static_cast<float>(1.0 / (2.0 * params.spatial_sigma * params.spatial_sigma));
  in.bilateral_xy_coef = static_cast<float>(1.0 / (2.0 * sxy * sxy));
  in.bilateral_rgb_coef = static_cast<float>(
      1.0 / (2.0 * params.bilateral_sigma_rgb * params.bilateral_sigma_rgb));
  in.spatial_weight = static_cast<float>(params.spatial_weight);
  in.bilateral_weight = static_cast<float>(params.bilateral_weight);
  const float compat = static_cast<float>(params.potts_compat);

  RowMatrix<float> q = probs;
  const bool pairwise = params.spatial_weight != 0 || params.bilateral_weight != 0;
  if (!pairwise) return FeatureMap<float>(unary_probs.height, unary_probs.width, std::move(q));

  RowMatrix<float> cached;
  if (n <= kMaxCachedPixels) {
    cached.resize(n, n);
    kernel_rows(in, 0, cached);
  }
  RowMatrix<float> message(n, labels);
  RowMatrix<float> block;
  for (int it = 0; it < params.iterations; ++it) {
    if (cached.size()) {
      message.noalias() = cached * q;
    } else {
      for (int begin = 0; begin < n; begin += kBlockRows) {
        const int rows = std::min(kBlockRows, n - begin);
        block.resize(rows, n);
        kernel_rows(in, begin, block);
        message.middleRows(begin, rows).noalias() = block * q;
      }
    }
    // Potts: energy_l = compat * sum_{l' != l} m_l'; dropping the per-pixel
    // constant leaves log p_l + compat * m_l.
    q = log_unary + compat * message;
    nn::softmax_rows_inplace(q);
  }
  return FeatureMap<float>(unary_probs.height, unary_probs.width, std::move(q));
}

}  // namespace auxseg
