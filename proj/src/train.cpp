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

#include "mia/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace mia {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross-entropy";
    case LossKind::kDice: return "dice";
    case LossKind::kDiceOneHot: return "dice-onehot";
  }
  return "unknown";
}

LossKind parse_loss(std::string_view s) {
  if (s == "cross-entropy" || s == "ce") return LossKind::kCrossEntropy;
  if (s == "dice") return LossKind::kDice;
  if (s == "dice-onehot") return LossKind::kDiceOneHot;
  throw Error(ErrorCode::kInvalidConfig, "unknown loss '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(lr_min >= 0.0) || !(lr_init > lr_min)) {
    throw Error(ErrorCode::kInvalidConfig, "need lr_init > lr_min >= 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch size must be at least 1");
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be at least 1");
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init, double lr_min) {
  if (total_steps == 0 || step > total_steps) {
    throw Error(ErrorCode::kInvalidConfig, "cosine_lr step " + std::to_string(step) + " of " +
                                               std::to_string(total_steps));
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end() || !(it->second.shape() == g.shape())) {
      throw Error(ErrorCode::kShapeMismatch, "gradient '" + name + "' has no matching parameter");
    }
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& theta = params.at(name);
    auto [mit, m_new] = state.m.try_emplace(name, g.shape());
    auto [vit, v_new] = state.v.try_emplace(name, g.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (!(m.shape() == g.shape()) || !(v.shape() == g.shape())) {
      throw Error(ErrorCode::kShapeMismatch, "optimizer state for '" + name + "' has wrong shape");
    }
    for (std::size_t i = 0; i < g.numel(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

double dice_loss(const Tensor& pred, const Tensor& target, double epsilon) {
  Graph g;
  return g.value(g.dice_loss(g.constant(pred), g.constant(target), epsilon)).item();
}

double cross_entropy_loss(const Tensor& logits, std::span<const int> labels) {
  Graph g;
  return g.value(g.softmax_cross_entropy(g.constant(logits),
                                         std::vector<int>(labels.begin(), labels.end())))
      .item();
}

NodeId record_loss(Graph& graph, NodeId output, LossKind kind, std::span<const int> labels,
                   const Tensor* masks) {
  switch (kind) {
    case LossKind::kCrossEntropy:
      return graph.softmax_cross_entropy(output, std::vector<int>(labels.begin(), labels.end()));
    case LossKind::kDice:
      if (!masks) throw Error(ErrorCode::kInvalidConfig, "dice loss needs mask targets");
      return graph.dice_loss(output, graph.constant(*masks));
    case LossKind::kDiceOneHot: {
      const Tensor& logits = graph.value(output);
      Tensor onehot(logits.shape());
      const std::size_t k = logits.dim(1);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
          throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(labels[i]));
        }
        onehot[i * k + labels[i]] = 1.0;
      }
      return graph.dice_loss(graph.softmax(output), graph.constant(onehot));
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown loss");
}

std::string EpochLog::to_line() const {
  std::ostringstream os;
  os.precision(6);
  os << "epoch=" << epoch << " step=" << step << " lr=" << lr << " loss=" << loss;
  if (accuracy) os << " acc=" << *accuracy;
  if (dice) os << " dice=" << *dice;
  return os.str();
}

namespace {

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = logits.data().subspan(r * k, k);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// Running overlap counts for thresholded masks.
struct MaskTally {
  std::size_t inter = 0, pred = 0, truth = 0, agree = 0, total = 0;

  void add(const Tensor& prob, const Tensor& mask) {
    for (std::size_t i = 0; i < prob.numel(); ++i) {
      const bool p = prob[i] >= 0.5, t = mask[i] >= 0.5;
      inter += p && t;
      pred += p;
      truth += t;
      agree += p == t;
    }
    total += prob.numel();
  }
  double dice() const {
    return pred + truth == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(pred + truth);
  }
};

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + epoch + 1;
}

}  // namespace

std::vector<EpochLog> train_loop(Model& model, const Dataset& data, const TrainConfig& cfg,
                                 std::ostream* log) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  if (data.is_segmentation() != (cfg.loss == LossKind::kDice)) {
    throw Error(ErrorCode::kInvalidConfig, "loss '" + std::string(to_string(cfg.loss)) +
                                               "' does not fit this dataset's targets");
  }
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  AdamState adam;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.eps;

  std::vector<EpochLog> logs;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(n, epoch_seed(cfg.seed, epoch));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    MaskTally tally;
    double lr = cfg.lr_init;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start,
                                             std::min(cfg.batch_size, n - start));
      const Dataset batch = subset(data, idx);

      Graph graph;
      const auto params = bind_parameters(model, graph, true);
      const NodeId out = model_forward(model, graph, graph.constant(batch.inputs), params).output;
      const NodeId loss = record_loss(graph, out, cfg.loss, batch.labels,
                                      batch.masks ? &*batch.masks : nullptr);
      auto grads_by_id = graph.backward(loss);

      std::map<std::string, Tensor> grads;
      for (const auto& [name, id] : params) grads.emplace(name, std::move(grads_by_id.at(id)));
      lr = cosine_lr(step, total_steps, cfg.lr_init, cfg.lr_min);
      adam_step(model.parameters, grads, adam, lr);
      ++step;

      loss_sum += graph.value(loss).item() * static_cast<double>(idx.size());
      if (batch.is_segmentation()) {
        tally.add(graph.value(out), *batch.masks);
      } else {
        const auto pred = argmax_rows(graph.value(out));
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
      }
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.step = step;
    entry.lr = lr;
    entry.loss = loss_sum / static_cast<double>(n);
    if (data.is_segmentation()) {
      entry.accuracy = static_cast<double>(tally.agree) / static_cast<double>(tally.total);
      entry.dice = tally.dice();
    } else {
      entry.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    }
    if (log) *log << entry.to_line() << '\n';
    logs.push_back(entry);
  }
  return logs;
}

MetricReport evaluate(const Model& model, const Dataset& data, std::size_t batch_size) {
  const std::size_t n = data.size();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "evaluation set is empty");
  std::vector<int> pred;
  std::vector<int> truth;
  MaskTally tally;
  for (std::size_t start = 0; start < n; start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, n - start));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    const Tensor out = predict(model, gather(data.inputs, idx));
    if (data.is_segmentation()) {
      const Tensor masks = gather(*data.masks, idx);
      tally.add(out, masks);
      for (std::size_t i = 0; i < out.numel(); ++i) {
        pred.push_back(out[i] >= 0.5);
        truth.push_back(masks[i] >= 0.5);
      }
    } else {
      const auto p = argmax_rows(out);
      pred.insert(pred.end(), p.begin(), p.end());
      for (std::size_t i : idx) truth.push_back(data.labels.at(i));
    }
  }
  if (data.is_segmentation()) {
    return make_report(confusion_counts(pred, truth, 2), Averaging::kBinary, tally.dice());
  }
  const std::size_t classes = std::max<std::size_t>(data.classes, 2);
  return make_report(confusion_counts(pred, truth, classes),
                     classes == 2 ? Averaging::kBinary : Averaging::kMacro);
}

}  // namespace mia
