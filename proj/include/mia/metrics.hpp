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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mia/tensor.hpp"

namespace mia {

enum class Averaging { kBinary, kMacro };

/// One-vs-rest counts per class.
struct ConfusionCounts {
  std::vector<std::size_t> tp, fp, fn, tn;
  std::size_t total = 0;

  std::size_t classes() const noexcept { return tp.size(); }
  std::size_t correct() const noexcept;
};

ConfusionCounts confusion_counts(std::span<const int> pred, std::span<const int> truth,
                                 std::size_t classes);

double accuracy(const ConfusionCounts& cc);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Binary averaging reads the counts of class 1. Macro averaging computes
/// precision, recall and F1 per class and takes unweighted means. Any ratio
/// with a zero denominator counts as 0.
PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& cc, Averaging averaging);

/// 2|P∩G| / (|P|+|G|) over binary masks; 1.0 when both are empty.
double dice_coefficient(const Tensor& pred_mask, const Tensor& truth_mask);

/// Elementwise x >= threshold ? 1 : 0.
Tensor binarize(const Tensor& x, double threshold = 0.5);

struct MetricReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> dice;
  Averaging averaging = Averaging::kMacro;

  /// Flat `key=value` lines.
  std::string to_text() const;
  static std::string csv_header();
  std::string to_csv() const;
};

MetricReport make_report(const ConfusionCounts& cc, Averaging averaging,
                         std::optional<double> dice = std::nullopt);

}  // namespace mia
