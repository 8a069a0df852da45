/*
 * Copyright 2026 The mia Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kernels.hpp"

#include <algorithm>

namespace mia::kernels {

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul needs 2-D operands, got " + a.shape().to_string() + " and " +
                    b.shape().to_string());
  }
  const std::size_t m = transpose_a ? a.dim(1) : a.dim(0);
  const std::size_t k = transpose_a ? a.dim(0) : a.dim(1);
  const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw Error(ErrorCode::kShapeMismatch,
                "matmul inner dims " + a.shape().to_string() + " x " + b.shape().to_string());
  }
  Tensor out(Shape{m, n});
  const auto A = a.data();
  const auto B = b.data();
  auto C = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = transpose_a ? A[p * m + i] : A[i * k + p];
      if (av == 0.0) continue;
      double* crow = C.data() + i * n;
      if (transpose_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * B[j * k + p];
      } else {
        const double* brow = B.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  return out;
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_ch, height, width, out_ch, ksize, out_h, out_w;
  long pad;
};

ConvGeometry geometry(const Shape& x, const Shape& k, std::size_t padding) {
  if (x.rank() != 4 || k.rank() != 4 || x[1] != k[1] || k[2] != k[3]) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d input " + x.to_string() + " with kernel " + k.to_string());
  }
  if (x[2] + 2 * padding < k[2] || x[3] + 2 * padding < k[3]) {
    throw Error(ErrorCode::kShapeMismatch, "conv2d kernel larger than padded input");
  }
  return {x[0], x[1], x[2], x[3], k[0], k[2],
          x[2] + 2 * padding - k[2] + 1, x[3] + 2 * padding - k[3] + 1,
          static_cast<long>(padding)};
}

// Visits every (output row, input row) and contiguous column span touched by
// kernel tap (kh, kw), calling fn(out_offset, in_offset, length).
template <typename Fn>
void for_each_tap_span(const ConvGeometry& g, std::size_t kh, std::size_t kw, Fn&& fn) {
  const long shift_w = static_cast<long>(kw) - g.pad;
  const long ow_begin = std::max(0L, -shift_w);
  const long ow_end = std::min(static_cast<long>(g.out_w), static_cast<long>(g.width) - shift_w);
  if (ow_begin >= ow_end) return;
  for (std::size_t oh = 0; oh < g.out_h; ++oh) {
    const long ih = static_cast<long>(oh + kh) - g.pad;
    if (ih < 0 || ih >= static_cast<long>(g.height)) continue;
    fn(oh * g.out_w + ow_begin, ih * g.width + ow_begin + shift_w,
       static_cast<std::size_t>(ow_end - ow_begin));
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t padding) {
  const ConvGeometry g = geometry(x.shape(), kernel.shape(), padding);
  Tensor out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
  const double* X = x.data().data();
  const double* K = kernel.data().data();
  double* Y = out.data().data();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t kk = g.ksize * g.ksize;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      double* y = Y + (n * g.out_ch + co) * out_plane;
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        const double* xp = X + (n * g.in_ch + ci) * in_plane;
        const double* kp = K + (co * g.in_ch + ci) * kk;
        for (std::size_t kh = 0; kh < g.ksize; ++kh) {
          for (std::size_t kw = 0; kw < g.ksize; ++kw) {
            const double w = kp[kh * g.ksize + kw];
            for_each_tap_span(g, kh, kw, [&](std::size_t yo, std::size_t xo, std::size_t len) {
              for (std::size_t t = 0; t < len; ++t) y[yo + t] += w * xp[xo + t];
            });
          }
        }
      }
    }
  }
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t padding) {
  const ConvGeometry g = geometry(input_shape, kernel.shape(), padding);
  Tensor dx(input_shape);
  const double* G = grad_out.data().data();
  const double* K = kernel.data().data();
  double* DX = dx.data().data();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t kk = g.ksize * g.ksize;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double* gy = G + (n * g.out_ch + co) * out_plane;
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        double* dxp = DX + (n * g.in_ch + ci) * in_plane;
        const double* kp = K + (co * g.in_ch + ci) * kk;
        for (std::size_t kh = 0; kh < g.ksize; ++kh) {
          for (std::size_t kw = 0; kw < g.ksize; ++kw) {
            const double w = kp[kh * g.ksize + kw];
            for_each_tap_span(g, kh, kw, [&](std::size_t yo, std::size_t xo, std::size_t len) {
              for (std::size_t t = 0; t < len; ++t) dxp[xo + t] += w * gy[yo + t];
            });
          }
        }
      }
    }
  }
  return dx;
}

Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& x, const Shape& kernel_shape,
                          std::size_t padding) {
  const ConvGeometry g = geometry(x.shape(), kernel_shape, padding);
  Tensor dk(kernel_shape);
  const double* G = grad_out.data().data();
  const double* X = x.data().data();
  double* DK = dk.data().data();
  const std::size_t in_plane = g.height * g.width;
  const std::size_t out_plane = g.out_h * g.out_w;
  const std::size_t kk = g.ksize * g.ksize;
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_ch; ++co) {
      const double* gy = G + (n * g.out_ch + co) * out_plane;
      for (std::size_t ci = 0; ci < g.in_ch; ++ci) {
        const double* xp = X + (n * g.in_ch + ci) * in_plane;
        double* dkp = DK + (co * g.in_ch + ci) * kk;
        for (std::size_t kh = 0; kh < g.ksize; ++kh) {
          for (std::size_t kw = 0; kw < g.ksize; ++kw) {
            double acc = 0.0;
            for_each_tap_span(g, kh, kw, [&](std::size_t yo, std::size_t xo, std::size_t len) {
              for (std::size_t t = 0; t < len; ++t) acc += gy[yo + t] * xp[xo + t];
            });
            dkp[kh * g.ksize + kw] += acc;
          }
        }
      }
    }
  }
  return dk;
}

}  // namespace mia::kernels
