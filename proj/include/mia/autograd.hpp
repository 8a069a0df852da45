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

#include <compare>
#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mia/tensor.hpp"

namespace mia {

struct NodeId {
  std::size_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class OpKind {
  kLeaf,
  kAdd,
  kBroadcastMul,
  kMatmul,
  kConv2d,
  kRelu,
  kSigmoid,
  kReduceMean,
  kReduceSum,
  kReshape,
  kMaxPool,
  kSoftmax,
  kSoftmaxCrossEntropy,
  kDiceLoss,
  kUpsampleNearest,
  kConcatChannels,
};

std::string_view to_string(OpKind kind);

struct Node {
  NodeId id;
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> inputs;
  Tensor value;
  std::optional<Tensor> grad;
  bool requires_grad = false;
  std::string label;

  // Op attributes; only the fields relevant to `kind` are populated.
  std::vector<std::size_t> axes;
  std::size_t padding = 0;
  bool transpose_rhs = false;
  std::vector<int> labels;
  double epsilon = 0.0;
  std::vector<std::size_t> argmax;
  Tensor saved;
};

/// Define-by-run tape. Nodes are appended in creation order, so ids are a
/// topological order and backward() walks them in reverse. References
/// returned by node() and value() stay valid for the graph's lifetime.
class Graph {
 public:
  NodeId constant(Tensor value, std::string label = {});
  NodeId parameter(Tensor value, std::string label = {});

  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// (M,K)·(K,N), or (M,K)·(N,K)ᵀ when transpose_rhs is set.
  NodeId matmul(NodeId a, NodeId b, bool transpose_rhs = false);
  /// Stride-1 cross-correlation of (N,Ci,H,W) with (Co,Ci,k,k), zero padded.
  NodeId conv2d(NodeId x, NodeId kernel, std::size_t padding);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId reduce_mean(NodeId x, std::vector<std::size_t> axes);
  NodeId reduce_sum(NodeId x, std::vector<std::size_t> axes);
  NodeId sum(NodeId x);
  NodeId reshape(NodeId x, Shape shape);
  /// 2x2 window, stride 2, on (N,C,H,W) with even H and W.
  NodeId max_pool(NodeId x);
  /// Softmax over the last axis of a 2-D tensor.
  NodeId softmax(NodeId logits);
  /// Mean over the batch of -log softmax(logits)[label].
  NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels);
  /// 1 - (2·Σ(p·t) + eps) / (Σp + Σt + eps) over the whole tensor.
  NodeId dice_loss(NodeId pred, NodeId target, double epsilon = 1.0);
  NodeId upsample_nearest(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);

  const Node& node(NodeId id) const { return nodes_.at(id.value); }
  const Tensor& value(NodeId id) const { return node(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<NodeId>& parameter_ids() const noexcept { return parameter_ids_; }

  /// Gradient of the scalar at `loss` with respect to every parameter node.
  /// Parameters the loss does not depend on receive zeros. Safe to call more
  /// than once; gradients from a previous call are discarded.
  std::map<NodeId, Tensor> backward(NodeId loss);

 private:
  NodeId push(Node node);
  Node& at(NodeId id) { return nodes_.at(id.value); }
  void accumulate(NodeId id, const Tensor& g);
  void propagate(const Node& node, const Tensor& g);

  std::deque<Node> nodes_;  // deque keeps value() references valid across appends
  std::vector<NodeId> parameter_ids_;
};

using NamedTensor = std::pair<std::string, Tensor>;

/// Builds a scalar loss from the input node and one node per parameter.
using LossBuilder =
    std::function<NodeId(Graph& graph, NodeId input, std::span<const NodeId> params)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Compares analytic gradients against central differences
/// (f(θ+h) − f(θ−h)) / 2h for every element of every parameter. The relative
/// error denominator is max(|analytic|, |numeric|) floored at 1e-8.
GradCheckReport grad_check(const LossBuilder& builder, const Tensor& input,
                           std::vector<NamedTensor> params, double step, double tol);

}  // namespace mia
