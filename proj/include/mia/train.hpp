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
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mia/autograd.hpp"
#include "mia/data.hpp"
#include "mia/metrics.hpp"
#include "mia/model.hpp"

namespace mia {

enum class LossKind {
  kCrossEntropy,
  kDice,        // soft Dice on per-pixel probabilities
  kDiceOneHot,  // soft Dice between softmax(logits) and one-hot labels
};

std::string_view to_string(LossKind kind);
LossKind parse_loss(std::string_view s);

struct TrainConfig {
  double lr_init = 0.01;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double lr_min = 0.0;
  LossKind loss = LossKind::kCrossEntropy;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws InvalidConfig unless lr_init > lr_min >= 0, batch_size >= 1 and
  /// epochs >= 1.
  void validate() const;
};

/// lr_min + (lr_init − lr_min)·(1 + cos(π·t/T))/2 for 0 <= t <= T.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init, double lr_min);

struct AdamState {
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

/// One bias-corrected Adam update of every parameter in `params`. Moment
/// buffers are created on first use.
void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr);

double dice_loss(const Tensor& pred, const Tensor& target, double epsilon = 1.0);
double cross_entropy_loss(const Tensor& logits, std::span<const int> labels);

/// Records the configured loss for a batch on top of the model output node.
NodeId record_loss(Graph& graph, NodeId output, LossKind kind, std::span<const int> labels,
                   const Tensor* masks);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> accuracy;
  std::optional<double> dice;

  /// `epoch=<n> step=<n> lr=<f> loss=<f> [acc=<f>] [dice=<f>]`
  std::string to_line() const;
};

/// Forward/backward/Adam over `epochs` passes of seeded-shuffled batches with
/// a per-step cosine schedule. Each epoch's record is also written to `log`.
std::vector<EpochLog> train_loop(Model& model, const Dataset& data, const TrainConfig& cfg,
                                 std::ostream* log = nullptr);

/// Classification: argmax predictions, binary averaging for two classes and
/// macro otherwise. Segmentation: pixels thresholded at 0.5, pixel accuracy
/// plus Dice over the whole set.
MetricReport evaluate(const Model& model, const Dataset& data, std::size_t batch_size = 64);

}  // namespace mia
