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

#pragma once

#include "mia/tensor.hpp"

namespace mia::kernels {

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b);

Tensor conv2d(const Tensor& x, const Tensor& kernel, std::size_t padding);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernel, const Shape& input_shape,
                         std::size_t padding);
Tensor conv2d_grad_kernel(const Tensor& grad_out, const Tensor& x, const Shape& kernel_shape,
                          std::size_t padding);

}  // namespace mia::kernels
