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

#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mia/error.hpp"

namespace mia {

/// Ordered extents of a dense array. 4-D tensors use NCHW order. An empty
/// dimension list denotes a rank-0 scalar holding one element.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t numel() const noexcept;

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(const Shape& shape) { return Tensor(shape); }
  static Tensor full(const Shape& shape, double value);
  static Tensor ones(const Shape& shape) { return full(shape, 1.0); }
  static Tensor scalar(double value) { return full(Shape{}, value); }
  static Tensor uniform(const Shape& shape, double lo, double hi, std::mt19937_64& rng);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.rank(); }
  std::size_t numel() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  /// Value of a single-element tensor regardless of rank.
  double item() const;

  /// Same data under a different shape with an equal element count.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Broadcast result shape: trailing dims aligned, each pair equal or one of
/// them 1. Throws ShapeMismatch otherwise.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor broadcast_mul(const Tensor& a, const Tensor& b);
Tensor broadcast_add(const Tensor& a, const Tensor& b);

/// Sums a tensor of a broadcast shape back down to `target`, the shape of one
/// of the original operands.
Tensor sum_to(const Tensor& x, const Shape& target);

/// Mean over the listed axes; reduced dims are dropped from the result.
Tensor reduce_mean(const Tensor& x, std::span<const std::size_t> axes);
Tensor reduce_mean(const Tensor& x, std::initializer_list<std::size_t> axes);
Tensor reduce_sum(const Tensor& x, std::span<const std::size_t> axes);

double sum(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Numerically stable logistic function; no overflow for any finite input.
double sigmoid(double x) noexcept;

}  // namespace mia
