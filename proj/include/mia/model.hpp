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

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mia/attention.hpp"
#include "mia/autograd.hpp"
#include "mia/tensor.hpp"

namespace mia {

/// Which attention block a model carries at its attention insertion points.
enum class Variant {
  kMia,     // full channel x spatial block
  kSeOnly,  // channel branch only, ws frozen to ones
  kNone,    // identity
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

enum class LayerKind {
  kConv3x3,
  kRelu,
  kMaxPool2x2,
  kMia,
  kUpsample2x,
  kConcatSkip,
  kLinear,
  kFlatten,
  kSigmoid,
};

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind;
  std::string name;
  std::size_t in = 0;   // channels or units
  std::size_t out = 0;
  std::size_t skip_from = 0;  // kConcatSkip: index of the layer whose output is appended
  bool enabled = true;        // kMia: a disabled block is the identity
};

struct ModelOptions {
  std::size_t reduction = 16;
  bool attention_bias = true;
  std::uint64_t seed = 0;
};

class Model {
 public:
  std::string architecture;
  Variant variant = Variant::kMia;
  ModelOptions options;
  Shape input;  // (C,H,W), batch excluded
  std::vector<LayerSpec> layers;
  std::map<std::string, Tensor> parameters;

  std::size_t param_count() const;
  std::size_t layer_param_count(std::size_t layer) const;
  std::vector<std::string> layer_parameter_names(std::size_t layer) const;
  /// Copy of the attention block parameters held by layer `layer`.
  MiaBlock attention_block(std::size_t layer) const;
  /// Output shape (batch excluded) of every layer; throws BadShape if the
  /// layer chain is inconsistent.
  std::vector<Shape> layer_shapes() const;
};

/// conv3x3(C→16) relu mia(16) maxpool conv3x3(16→32) relu mia(32) maxpool
/// flatten linear(→classes). H and W must be divisible by 4.
Model build_mini_cnn(const Shape& input, std::size_t classes, Variant variant,
                     const ModelOptions& options = {});

/// Encoder-decoder with one skip connection and attention at the
/// bottleneck; emits per-pixel foreground probabilities (N,1,H,W).
Model build_mini_segnet(const Shape& input, Variant variant, const ModelOptions& options = {});

/// conv3x3(1→16) relu mia(16) flatten linear(→classes) over (1,1,F) rows.
Model build_mini_flownet(std::size_t features, std::size_t classes, Variant variant,
                         const ModelOptions& options = {});

/// Rebuilds the architecture named by `architecture` (as stored in
/// Model::architecture).
Model build_model(std::string_view architecture, const Shape& input, std::size_t classes,
                  Variant variant, const ModelOptions& options = {});

/// Adds every parameter to the graph; trainable parameters become
/// differentiable leaves.
std::map<std::string, NodeId> bind_parameters(const Model& model, Graph& graph, bool trainable);

struct ForwardPass {
  NodeId output;
  std::vector<MiaTrace> attention;  // one per enabled attention layer
};

/// Records the model on `graph` applied to node `x` of shape (N, input...).
ForwardPass model_forward(const Model& model, Graph& graph, NodeId x,
                          const std::map<std::string, NodeId>& params);
NodeId model_forward(const Model& model, Graph& graph, NodeId x);

/// Inference without gradients.
Tensor predict(const Model& model, const Tensor& x);

}  // namespace mia
