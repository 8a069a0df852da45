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
#include <random>
#include <string>
#include <string>

#include "mia/autograd.hpp"
#include "mia/tensor.hpp"

namespace mia {

/// Width of the channel MLP bottleneck: C/r, or max(1, round(C/r)) when r
/// does not divide C.
std::size_t bottleneck_width(std::size_t channels, std::size_t reduction);

/// Parameters of one multidimensional interactive attention block.
///
/// The channel branch is a two-layer bottleneck MLP over the pooled channel
/// descriptor; the spatial branch is a single 7x7 convolution over the
/// channel-averaged map. Either the FC biases (`has_bias`) or the whole
/// spatial branch (`has_spatial`) can be dropped; a block without the spatial
/// branch behaves as pure channel attention with ws ≡ 1.
struct MiaBlock {
  static constexpr std::size_t kKernelSize = 7;

  std::size_t channels = 0;
  std::size_t reduction = 16;
  bool has_bias = true;
  bool has_spatial = true;

  Tensor w1;           // (hidden, C)
  Tensor b1;           // (hidden)
  Tensor w2;           // (C, hidden)
  Tensor b2;           // (C)
  Tensor conv_kernel;  // (1, 1, 7, 7)
  Tensor conv_bias;    // (1)

  /// All-zero block; every gate evaluates to sigmoid(0) = 0.5.
  MiaBlock(std::size_t channels, std::size_t reduction, bool has_bias = true,
           bool has_spatial = true);

  std::size_t hidden() const { return w1.dim(0); }

  /// Glorot-uniform weights, zero biases.
  void initialize(std::mt19937_64& rng);
};

/// Every intermediate of one forward pass. Shapes: z (N,C), m (N,H,W),
/// wc (N,C), ws (N,H,W), a (N,C,H,W).
struct AttentionMaps {
  Tensor z;
  Tensor m;
  Tensor wc;
  Tensor ws;
  Tensor a;
};

struct MiaOutput {
  Tensor output;
  AttentionMaps maps;
};

Tensor channel_descriptor(const Tensor& x);
Tensor spatial_descriptor(const Tensor& x);
Tensor channel_weights(const Tensor& z, const MiaBlock& block);
Tensor spatial_weights(const Tensor& m, const MiaBlock& block);
Tensor fuse_attention(const Tensor& wc, const Tensor& ws);
Tensor apply_attention(const Tensor& x, const Tensor& a);
MiaOutput forward(const Tensor& x, const MiaBlock& block);

/// Number of scalar parameters the block carries.
std::size_t param_count(const MiaBlock& block);
std::size_t param_count(std::size_t channels, std::size_t reduction, bool has_bias = true,
                        bool has_spatial = true);

/// Graph nodes holding a block's parameters. Absent members mean the block
/// was built without that parameter group.
struct MiaNodes {
  NodeId w1;
  std::optional<NodeId> b1;
  NodeId w2;
  std::optional<NodeId> b2;
  std::optional<NodeId> conv_kernel;
  std::optional<NodeId> conv_bias;
};

/// Node ids of the recorded intermediates; `ws` is absent without a spatial
/// branch.
struct MiaTrace {
  NodeId z;
  NodeId m;
  NodeId wc;
  std::optional<NodeId> ws;
  NodeId a;
  NodeId output;
};

/// Adds the block's parameters to `graph`, as trainable parameters or as
/// constants. Labels are `prefix` + field name.
MiaNodes bind(Graph& graph, const MiaBlock& block, const std::string& prefix, bool trainable);

NodeId record_channel_descriptor(Graph& graph, NodeId x);
NodeId record_spatial_descriptor(Graph& graph, NodeId x);
NodeId record_channel_weights(Graph& graph, NodeId z, const MiaNodes& params);
NodeId record_spatial_weights(Graph& graph, NodeId m, const MiaNodes& params);
NodeId record_fuse(Graph& graph, NodeId wc, NodeId ws);
MiaTrace record_forward(Graph& graph, NodeId x, const MiaNodes& params);

/// Binary 8-bit PGM (P5) of a 2-D map; values in [0,1] map linearly to
/// [0,255], anything outside is clamped.
std::string encode_pgm(const Tensor& map);

}  // namespace mia
