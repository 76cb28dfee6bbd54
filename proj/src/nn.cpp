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

#include "auxseg/nn.hpp"

#include <algorithm>
#include <cmath>

#include "auxseg/errors.hpp"

namespace auxseg::nn {

int conv_output_size(int input, const ConvGeometry& g) {
  const int span = input + 2 * g.padding - g.dilation * (g.kernel - 1) - 1;
  if (span < 0) throw ShapeError("convolution window larger than padded input");
  return span / g.stride + 1;
}

namespace {

template <typename T>
RowMatrix<T> im2col(const FeatureMap<T>& in, const ConvGeometry& g, int out_h, int out_w) {
  const int cin = in.channels();
  const int k = g.kernel;
  RowMatrix<T> cols = RowMatrix<T>::Zero(out_h * out_w, k * k * cin);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const int row = oy * out_w + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - g.padding + ky * g.dilation;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - g.padding + kx * g.dilation;
          if (ix < 0 || ix >= in.width) continue;
          cols.block(row, (ky * k + kx) * cin, 1, cin) = in.data.row(iy * in.width + ix);
        }
      }
    }
  }
  return cols;
}

template <typename T>
FeatureMap<T> col2im(const RowMatrix<T>& cols, const ConvGeometry& g, int in_h, int in_w,
                     int cin, int out_h, int out_w) {
  FeatureMap<T> out(in_h, in_w, cin);
  const int k = g.kernel;
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const int row = oy * out_w + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride - g.padding + ky * g.dilation;
        if (iy < 0 || iy >= in_h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride - g.padding + kx * g.dilation;
          if (ix < 0 || ix >= in_w) continue;
          out.data.row(iy * in_w + ix) += cols.block(row, (ky * k + kx) * cin, 1, cin);
        }
      }
    }
  }
  return out;
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.padding == 0;
}

struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> w_hi;
};

AxisTaps axis_taps(int in, int out) {
  AxisTaps taps;
  taps.lo.resize(out);
  taps.hi.resize(out);
  taps.w_hi.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int lo = static_cast<int>(std::floor(src));
    lo = std::min(lo, in - 1);
    taps.lo[o] = lo;
    taps.hi[o] = std::min(lo + 1, in - 1);
    taps.w_hi[o] = src - lo;
  }
  return taps;
}

}  // namespace

template <typename T>
FeatureMap<T> conv_forward(const FeatureMap<T>& input, const RowMatrix<T>& weight,
                           const RowMatrix<T>& bias, const ConvGeometry& g, RowMatrix<T>* cols) {
  const int cin = input.channels();
  if (weight.rows() != g.kernel * g.kernel * cin) {
    throw ShapeError("convolution weight rows do not match kernel*kernel*Cin");
  }
  if (bias.size() != weight.cols()) throw ShapeError("convolution bias size mismatch");
  const int out_h = conv_output_size(input.height, g);
  const int out_w = conv_output_size(input.width, g);
  FeatureMap<T> out(out_h, out_w, static_cast<int>(weight.cols()));
  if (is_pointwise(g)) {
    out.data.noalias() = input.data * weight;
    if (cols) *cols = input.data;
  } else {
    RowMatrix<T> c = im2col(input, g, out_h, out_w);
    out.data.noalias() = c * weight;
    if (cols) *cols = std::move(c);
  }
  out.data.rowwise() += bias.row(0);
  return out;
}

template <typename T>
FeatureMap<T> conv_backward(const FeatureMap<T>& grad_output, const RowMatrix<T>& cols,
                            const RowMatrix<T>& weight, const ConvGeometry& g, int in_height,
                            int in_width, RowMatrix<T>& grad_weight, RowMatrix<T>& grad_bias) {
  grad_weight.noalias() += cols.transpose() * grad_output.data;
  grad_bias += grad_output.data.colwise().sum();
  RowMatrix<T> grad_cols = grad_output.data * weight.transpose();
  const int cin = static_cast<int>(weight.rows()) / (g.kernel * g.kernel);
  if (is_pointwise(g)) return FeatureMap<T>(in_height, in_width, std::move(grad_cols));
  return col2im(grad_cols, g, in_height, in_width, cin, grad_output.height, grad_output.width);
}

template <typename T>
FeatureMap<T> resize_bilinear(const FeatureMap<T>& input, int out_height, int out_width) {
  if (out_height == input.height && out_width == input.width) return input;
  const AxisTaps ty = axis_taps(input.height, out_height);
  const AxisTaps tx = axis_taps(input.width, out_width);
  FeatureMap<T> out(out_height, out_width, input.channels());
  for (int y = 0; y < out_height; ++y) {
    const T wy1 = static_cast<T>(ty.w_hi[y]);
    const T wy0 = T(1) - wy1;
    for (int x = 0; x < out_width; ++x) {
      const T wx1 = static_cast<T>(tx.w_hi[x]);
      const T wx0 = T(1) - wx1;
      auto dst = out.data.row(y * out_width + x);
      dst = wy0 * wx0 * input.data.row(ty.lo[y] * input.width + tx.lo[x]) +
            wy0 * wx1 * input.data.row(ty.lo[y] * input.width + tx.hi[x]) +
            wy1 * wx0 * input.data.row(ty.hi[y] * input.width + tx.lo[x]) +
            wy1 * wx1 * input.data.row(ty.hi[y] * input.width + tx.hi[x]);
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> resize_bilinear_backward(const FeatureMap<T>& grad_output, int in_height,
                                       int in_width) {
  if (grad_output.height == in_height && grad_output.width == in_width) return grad_output;
  const AxisTaps ty = axis_taps(in_height, grad_output.height);
  const AxisTaps tx = axis_taps(in_width, grad_output.width);
  FeatureMap<T> grad(in_height, in_width, grad_output.channels());
  for (int y = 0; y < grad_output.height; ++y) {
    const T wy1 = static_cast<T>(ty.w_hi[y]);
    const T wy0 = T(1) - wy1;
    for (int x = 0; x < grad_output.width; ++x) {
      const T wx1 = static_cast<T>(tx.w_hi[x]);
      const T wx0 = T(1) - wx1;
      const auto src = grad_output.data.row(y * grad_output.width + x);
      grad.data.row(ty.lo[y] * in_width + tx.lo[x]) += wy0 * wx0 * src;
      grad.data.row(ty.lo[y] * in_width + tx.hi[x]) += wy0 * wx1 * src;
      grad.data.row(ty.hi[y] * in_width + tx.lo[x]) += wy1 * wx0 * src;
      grad.data.row(ty.hi[y] * in_width + tx.hi[x]) += wy1 * wx1 * src;
    }
  }
  return grad;
}

#define AUXSEG_INSTANTIATE(T)                                                              \
  template FeatureMap<T> conv_forward(const FeatureMap<T>&, const RowMatrix<T>&,          \
                                      const RowMatrix<T>&, const ConvGeometry&,           \
                                      RowMatrix<T>*);                                     \
  template FeatureMap<T> conv_backward(const FeatureMap<T>&, const RowMatrix<T>&,         \
                                       const RowMatrix<T>&, const ConvGeometry&, int, int, \
                                       RowMatrix<T>&, RowMatrix<T>&);                     \
  template FeatureMap<T> resize_bilinear(const FeatureMap<T>&, int, int);                 \
  template FeatureMap<T> resize_bilinear_backward(const FeatureMap<T>&, int, int);

AUXSEG_INSTANTIATE(float)
AUXSEG_INSTANTIATE(double)
#undef AUXSEG_INSTANTIATE

}  // namespace auxseg::nn
