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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/tensor.hpp"

namespace mia {

enum class Split { kTrain, kTest };

/// Per-channel (or per-feature) statistics subtracted and divided out of the
/// raw inputs.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  Tensor inputs;                // (N, ...)
  std::vector<int> labels;      // classification targets, empty for masks
  std::optional<Tensor> masks;  // segmentation targets (N,1,H,W)
  std::size_t classes = 0;
  Split split = Split::kTrain;
  Normalization normalization;
  std::size_t skipped_rows = 0;

  std::size_t size() const { return inputs.dim(0); }
  bool is_segmentation() const { return masks.has_value(); }
  /// Sample shape with the batch dim removed.
  Shape sample_shape() const;
};

/// Rows `indices` of a batch-major tensor.
Tensor gather(const Tensor& x, std::span<const std::size_t> indices);
Dataset subset(const Dataset& d, std::span<const std::size_t> indices);

/// A permutation of [0, n) determined by `seed`.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// CIFAR-10 binary format: 1 label byte then 3072 pixel bytes (1024 R, 1024 G,
// 1024 B, each plane row-major 32x32).
inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarPixels;

struct CifarRecord {
  int label = 0;
  std::array<std::uint8_t, kCifarPixels> pixels{};
};

std::vector<CifarRecord> read_cifar10_file(const std::filesystem::path& path,
                                           std::optional<std::size_t> limit = std::nullopt);

/// Loads data_batch_{1..5}.bin (train) or test_batch.bin (test) from `dir`,
/// scales pixels to [0,1] and standardizes each channel. Statistics come
/// from the loaded subset unless `stats` is given.
Dataset load_cifar10(const std::filesystem::path& dir, Split split,
                     std::optional<std::size_t> limit = std::nullopt,
                     const Normalization* stats = nullptr);

/// (n,3,16,16) images where class k shows a bright 4x4 square at a
/// class-specific grid cell, plus Gaussian noise.
Dataset synth_blobs(std::size_t n, std::size_t classes, std::uint64_t seed, double noise = 0.1);

struct ShapeSpec {
  enum class Kind { kRectangle, kDisc } kind = Kind::kRectangle;
  // Rectangle: rows [top, bottom), cols [left, right). Disc: centre and radius.
  double top = 0, left = 0, bottom = 0, right = 0;
  double cy = 0, cx = 0, radius = 0;
};

/// Binary (1,h,w) mask of the union of `shapes`.
Tensor render_mask(std::size_t h, std::size_t w, std::span<const ShapeSpec> shapes);

/// Grayscale (n,1,h,w) images of random rectangles and discs; the targets
/// are the exact shape masks.
Dataset synth_masks(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed,
                    double noise = 0.1);

/// Flow records: header row, one label column, every other column a numeric
/// feature. Labels are 0/1 or BENIGN (0) versus anything else (1). Features
/// are standardized per column and laid out as (N,1,1,F).
Dataset load_flows_csv(const std::filesystem::path& path, const std::string& label_column,
                       const Normalization* stats = nullptr);

/// Same as load_flows_csv but leaves the features unstandardized.
Dataset read_flows_csv(const std::filesystem::path& path, const std::string& label_column);

/// Standardizes every feature of `x` (N,...) independently, treating all
/// trailing dims as one feature axis. Constant columns map to exactly 0.
Normalization standardize_columns(Tensor& x, const Normalization* stats = nullptr);

/// Standardizes `x` (N,C,...) per channel in place; returns the statistics
/// used. Standard deviations are floored at 1e-8.
Normalization standardize(Tensor& x, const Normalization* stats = nullptr);

}  // namespace mia
