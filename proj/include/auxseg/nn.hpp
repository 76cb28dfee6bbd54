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

#pragma once

#include "auxseg/tensor.hpp"

namespace auxseg::nn {

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int dilation = 1;
  int padding = 1;
};

int conv_output_size(int input, const ConvGeometry& g);

// Receptive field (in input cells) of a single convolution along one axis.
inline int receptive_field(const ConvGeometry& g) { return g.dilation * (g.kernel - 1) + 1; }

// Zero-padded convolution lowered to a GEMM. `weight` is (k*k*Cin) x Cout in
// (ky, kx, cin) row order; `bias` is 1 x Cout. When `cols` is non-null the
// im2col buffer is kept for the backward pass.
template <typename T>
FeatureMap<T> conv_forward(const FeatureMap<T>& input, const RowMatrix<T>& weight,
                           const RowMatrix<T>& bias, const ConvGeometry& g,
                           RowMatrix<T>* cols = nullptr);

// Accumulates weight/bias gradients into grad_weight/grad_bias and returns the
// gradient with respect to the convolution input.
template <typename T>
FeatureMap<T> conv_backward(const FeatureMap<T>& grad_output, const RowMatrix<T>& cols,
                            const RowMatrix<T>& weight, const ConvGeometry& g, int in_height,
                            int in_width, RowMatrix<T>& grad_weight, RowMatrix<T>& grad_bias);

template <typename T>
void relu_inplace(RowMatrix<T>& x) {
  x = x.cwiseMax(T(0));
}

// grad *= (activated > 0)
template <typename T>
void relu_backward_inplace(RowMatrix<T>& grad, const RowMatrix<T>& activated) {
  grad = (activated.array() > T(0)).select(grad, T(0));
}

template <typename T>
void softmax_rows_inplace(RowMatrix<T>& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const T m = row.maxCoeff();
    row = (row.array() - m).exp();
    row /= row.sum();
  }
}

// Backward of a row-wise softmax given its output y: dx = y * (dy - <dy, y>).
template <typename T>
RowMatrix<T> softmax_rows_backward(const RowMatrix<T>& y, const RowMatrix<T>& grad_y) {
  RowMatrix<T> prod = (grad_y.array() * y.array()).matrix();
  Eigen::Matrix<T, Eigen::Dynamic, 1> dots = prod.rowwise().sum();
  RowMatrix<T> out = grad_y;
  out.colwise() -= dots;
  return (out.array() * y.array()).matrix();
}

// Bilinear resize with half-pixel centers (align_corners = false).
template <typename T>
FeatureMap<T> resize_bilinear(const FeatureMap<T>& input, int out_height, int out_width);

// Adjoint of resize_bilinear: maps a gradient at the output size back onto the
// input grid.
template <typename T>
FeatureMap<T> resize_bilinear_backward(const FeatureMap<T>& grad_output, int in_height,
                                       int in_width);

}  // namespace auxseg::nn
