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

#include "mia/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mia {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kAxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kBadShape: return "BadShape";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNonBinaryInput: return "NonBinaryInput";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kTruncatedRecord: return "TruncatedRecord";
    case ErrorCode::kMissingLabelColumn: return "MissingLabelColumn";
    case ErrorCode::kNoValidRows: return "NoValidRows";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kShapeMismatchOnLoad: return "ShapeMismatchOnLoad";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  for (std::size_t d : dims_) {
    if (d == 0) throw Error(ErrorCode::kBadShape, "zero extent in shape " + to_string());
  }
}

std::size_t Shape::numel() const noexcept {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ',';
    os << dims_[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_.numel(), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw Error(ErrorCode::kShapeMismatch, "data length " + std::to_string(data_.size()) +
                                               " does not match shape " + shape_.to_string());
  }
}

Tensor Tensor::full(const Shape& shape, double value) {
  return Tensor(shape, std::vector<double>(shape.numel(), value));
}

Tensor Tensor::uniform(const Shape& shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.data_) v = dist(rng);
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_.to_string());
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != numel()) {
    throw Error(ErrorCode::kShapeMismatch,
                "cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  }
  return Tensor(std::move(shape), data_);
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.rank(), b.rank());
  std::vector<std::size_t> out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.rank() ? 1 : a[i - (rank - a.rank())];
    const std::size_t db = i < rank - b.rank() ? 1 : b[i - (rank - b.rank())];
    if (da != db && da != 1 && db != 1) {
      throw Error(ErrorCode::kShapeMismatch,
                  "cannot broadcast " + a.to_string() + " with " + b.to_string());
    }
    out[i] = std::max(da, db);
  }
  return Shape(std::move(out));
}

namespace {

// Strides of `s` aligned to `rank` trailing dims, zero where the operand is broadcast.
std::vector<std::size_t> broadcast_strides(const Shape& s, std::size_t rank) {
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < s.rank(); ++k) {
    const std::size_t axis = s.rank() - 1 - k;
    const std::size_t out_axis = rank - 1 - k;
    strides[out_axis] = s[axis] == 1 ? 0 : stride;
    stride *= s[axis];
  }
  return strides;
}

template <typename Op>
Tensor broadcast_binary(const Tensor& a, const Tensor& b, Op op) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = op(a[i], b[i]);
    return out;
  }
  const Shape shape = broadcast_shape(a.shape(), b.shape());
  const std::size_t rank = shape.rank();
  const auto sa = broadcast_strides(a.shape(), rank);
  const auto sb = broadcast_strides(b.shape(), rank);
  Tensor out(shape);
  std::vector<std::size_t> index(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t flat = 0; flat < out.numel(); ++flat) {
    out[flat] = op(a[ia], b[ib]);
    for (std::size_t k = rank; k-- > 0;) {
      ++index[k];
      ia += sa[k];
      ib += sb[k];
      if (index[k] < shape[k]) break;
      ia -= sa[k] * index[k];
      ib -= sb[k] * index[k];
      index[k] = 0;
    }
  }
  return out;
}

std::vector<bool> reduced_mask(const Shape& s, std::span<const std::size_t> axes) {
  std::vector<bool> mask(s.rank(), false);
  for (std::size_t a : axes) {
    if (a >= s.rank()) {
      throw Error(ErrorCode::kAxisOutOfRange,
                  "axis " + std::to_string(a) + " for shape " + s.to_string());
    }
    mask[a] = true;
  }
  return mask;
}

}  // namespace

Tensor broadcast_mul(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x * y; });
}

Tensor broadcast_add(const Tensor& a, const Tensor& b) {
  return broadcast_binary(a, b, [](double x, double y) { return x + y; });
}

Tensor sum_to(const Tensor& x, const Shape& target) {
  if (x.shape() == target) return x;
  const Shape full = broadcast_shape(x.shape(), target);
  if (!(full == x.shape())) {
    throw Error(ErrorCode::kShapeMismatch,
                "sum_to " + target.to_string() + " from " + x.shape().to_string());
  }
  const std::size_t rank = x.rank();
  const auto st = broadcast_strides(target, rank);
  Tensor out(target);
  std::vector<std::size_t> index(rank, 0);
  std::size_t it = 0;
  for (std::size_t flat = 0; flat < x.numel(); ++flat) {
    out[it] += x[flat];
    for (std::size_t k = rank; k-- > 0;) {
      ++index[k];
      it += st[k];
      if (index[k] < x.dim(k)) break;
      it -= st[k] * index[k];
      index[k] = 0;
    }
  }
  return out;
}

Tensor reduce_sum(const Tensor& x, std::span<const std::size_t> axes) {
  const auto mask = reduced_mask(x.shape(), axes);
  std::vector<std::size_t> kept;
  std::vector<std::size_t> keepdims;
  for (std::size_t k = 0; k < x.rank(); ++k) {
    keepdims.push_back(mask[k] ? 1 : x.dim(k));
    if (!mask[k]) kept.push_back(x.dim(k));
  }
  Tensor collapsed = sum_to(x, Shape(keepdims));
  return collapsed.reshaped(Shape(std::move(kept)));
}

Tensor reduce_mean(const Tensor& x, std::span<const std::size_t> axes) {
  Tensor out = reduce_sum(x, axes);
  const auto mask = reduced_mask(x.shape(), axes);
  std::size_t count = 1;
  for (std::size_t k = 0; k < x.rank(); ++k) {
    if (mask[k]) count *= x.dim(k);
  }
  const double scale = 1.0 / static_cast<double>(count);
  for (double& v : out.data()) v *= scale;
  return out;
}

Tensor reduce_mean(const Tensor& x, std::initializer_list<std::size_t> axes) {
  return reduce_mean(x, std::span<const std::size_t>(axes.begin(), axes.size()));
}

double sum(const Tensor& x) {
  return std::accumulate(x.data().begin(), x.data().end(), 0.0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw Error(ErrorCode::kShapeMismatch, a.shape().to_string() + " vs " + b.shape().to_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sigmoid(double x) noexcept {
  // Clamped so the result stays inside the open interval even where the
  // exact value rounds to 0 or 1 in double precision.
  constexpr double kLow = std::numeric_limits<double>::denorm_min();
  constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  double s;
  if (x >= 0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kLow, kHigh);
}

}  // namespace mia
