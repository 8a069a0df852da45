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

#include "mia/attention.hpp"

#include <algorithm>
#include <cmath>

namespace mia {

std::size_t bottleneck_width(std::size_t channels, std::size_t reduction) {
  if (channels == 0 || reduction == 0) {
    throw Error(ErrorCode::kBadShape, "channels and reduction must be positive");
  }
  if (channels % reduction == 0) return channels / reduction;
  const auto rounded = static_cast<std::size_t>(
      std::llround(static_cast<double>(channels) / static_cast<double>(reduction)));
  return std::max<std::size_t>(1, rounded);
}

MiaBlock::MiaBlock(std::size_t channels_, std::size_t reduction_, bool has_bias_,
                   bool has_spatial_)
    : channels(channels_), reduction(reduction_), has_bias(has_bias_), has_spatial(has_spatial_) {
  const std::size_t h = bottleneck_width(channels, reduction);
  w1 = Tensor(Shape{h, channels});
  b1 = Tensor(Shape{h});
  w2 = Tensor(Shape{channels, h});
  b2 = Tensor(Shape{channels});
  conv_kernel = Tensor(Shape{1, 1, kKernelSize, kKernelSize});
  conv_bias = Tensor(Shape{1});
}

void MiaBlock::initialize(std::mt19937_64& rng) {
  const auto glorot = [&](Tensor& t, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    t = Tensor::uniform(t.shape(), -limit, limit, rng);
  };
  const double h = static_cast<double>(hidden());
  const double c = static_cast<double>(channels);
  glorot(w1, c, h);
  glorot(w2, h, c);
  constexpr double taps = kKernelSize * kKernelSize;
  glorot(conv_kernel, taps, taps);
  b1 = Tensor(b1.shape());
  b2 = Tensor(b2.shape());
  conv_bias = Tensor(conv_bias.shape());
}

std::size_t param_count(std::size_t channels, std::size_t reduction, bool has_bias,
                        bool has_spatial) {
  const std::size_t h = bottleneck_width(channels, reduction);
  std::size_t count = 2 * channels * h;
  if (has_bias) count += h + channels;
  if (has_spatial) count += MiaBlock::kKernelSize * MiaBlock::kKernelSize + 1;
  return count;
}

std::size_t param_count(const MiaBlock& block) {
  return param_count(block.channels, block.reduction, block.has_bias, block.has_spatial);
}

MiaNodes bind(Graph& graph, const MiaBlock& block, const std::string& prefix, bool trainable) {
  const auto add = [&](const Tensor& t, const char* name) {
    return trainable ? graph.parameter(t, prefix + name) : graph.constant(t, prefix + name);
  };
  MiaNodes nodes;
  nodes.w1 = add(block.w1, "w1");
  nodes.w2 = add(block.w2, "w2");
  if (block.has_bias) {
    nodes.b1 = add(block.b1, "b1");
    nodes.b2 = add(block.b2, "b2");
  }
  if (block.has_spatial) {
    nodes.conv_kernel = add(block.conv_kernel, "conv_kernel");
    nodes.conv_bias = add(block.conv_bias, "conv_bias");
  }
  return nodes;
}

namespace {

void require_4d(const Tensor& x, const char* what) {
  if (x.rank() != 4) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " expects (N,C,H,W), got " + x.shape().to_string());
  }
}

}  // namespace

NodeId record_channel_descriptor(Graph& graph, NodeId x) {
  require_4d(graph.value(x), "channel_descriptor");
  return graph.reduce_mean(x, {2, 3});
}

NodeId record_spatial_descriptor(Graph& graph, NodeId x) {
  require_4d(graph.value(x), "spatial_descriptor");
  return graph.reduce_mean(x, {1});
}

NodeId record_channel_weights(Graph& graph, NodeId z, const MiaNodes& params) {
  const Tensor& zv = graph.value(z);
  const std::size_t channels = graph.value(params.w1).dim(1);
  if (zv.rank() != 2 || zv.dim(1) != channels) {
    throw Error(ErrorCode::kShapeMismatch, "channel descriptor " + zv.shape().to_string() +
                                               " for a block of " + std::to_string(channels) +
                                               " channels");
  }
  NodeId hidden = graph.matmul(z, params.w1, true);
  if (params.b1) hidden = graph.add(hidden, *params.b1);
  hidden = graph.relu(hidden);
  NodeId logits = graph.matmul(hidden, params.w2, true);
  if (params.b2) logits = graph.add(logits, *params.b2);
  return graph.sigmoid(logits);
}

NodeId record_spatial_weights(Graph& graph, NodeId m, const MiaNodes& params) {
  const Tensor& mv = graph.value(m);
  if (mv.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch,
                "spatial descriptor expects (N,H,W), got " + mv.shape().to_string());
  }
  if (!params.conv_kernel) {
    throw Error(ErrorCode::kShapeMismatch, "block has no spatial branch");
  }
  const Shape plane{mv.dim(0), 1, mv.dim(1), mv.dim(2)};
  NodeId response = graph.conv2d(graph.reshape(m, plane), *params.conv_kernel,
                                 MiaBlock::kKernelSize / 2);
  if (params.conv_bias) response = graph.add(response, *params.conv_bias);
  return graph.reshape(graph.sigmoid(response), mv.shape());
}

NodeId record_fuse(Graph& graph, NodeId wc, NodeId ws) {
  const Tensor& c = graph.value(wc);
  const Tensor& s = graph.value(ws);
  if (c.rank() != 2 || s.rank() != 3 || c.dim(0) != s.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "fuse_attention " + c.shape().to_string() + " with " + s.shape().to_string());
  }
  return graph.mul(graph.reshape(wc, Shape{c.dim(0), c.dim(1), 1, 1}),
                   graph.reshape(ws, Shape{s.dim(0), 1, s.dim(1), s.dim(2)}));
}

MiaTrace record_forward(Graph& graph, NodeId x, const MiaNodes& params) {
  const Tensor& xv = graph.value(x);
  require_4d(xv, "mia forward");
  MiaTrace trace;
  trace.z = record_channel_descriptor(graph, x);
  trace.m = record_spatial_descriptor(graph, x);
  trace.wc = record_channel_weights(graph, trace.z, params);
  if (params.conv_kernel) {
    trace.ws = record_spatial_weights(graph, trace.m, params);
    trace.a = record_fuse(graph, trace.wc, *trace.ws);
  } else {
    trace.a = graph.reshape(trace.wc, Shape{xv.dim(0), xv.dim(1), 1, 1});
  }
  trace.output = graph.mul(x, trace.a);
  return trace;
}

Tensor channel_descriptor(const Tensor& x) {
  Graph g;
  return g.value(record_channel_descriptor(g, g.constant(x)));
}

Tensor spatial_descriptor(const Tensor& x) {
  Graph g;
  return g.value(record_spatial_descriptor(g, g.constant(x)));
}

Tensor channel_weights(const Tensor& z, const MiaBlock& block) {
  Graph g;
  const MiaNodes params = bind(g, block, "", false);
  return g.value(record_channel_weights(g, g.constant(z), params));
}

Tensor spatial_weights(const Tensor& m, const MiaBlock& block) {
  Graph g;
  const MiaNodes params = bind(g, block, "", false);
  return g.value(record_spatial_weights(g, g.constant(m), params));
}

Tensor fuse_attention(const Tensor& wc, const Tensor& ws) {
  Graph g;
  return g.value(record_fuse(g, g.constant(wc), g.constant(ws)));
}

Tensor apply_attention(const Tensor& x, const Tensor& a) {
  if (!(x.shape() == a.shape())) {
    throw Error(ErrorCode::kShapeMismatch,
                "apply_attention " + x.shape().to_string() + " vs " + a.shape().to_string());
  }
  return broadcast_mul(x, a);
}

MiaOutput forward(const Tensor& x, const MiaBlock& block) {
  if (x.rank() != 4 || x.dim(1) != block.channels) {
    throw Error(ErrorCode::kShapeMismatch, "input " + x.shape().to_string() + " for a block of " +
                                               std::to_string(block.channels) + " channels");
  }
  Graph g;
  const MiaNodes params = bind(g, block, "", false);
  const MiaTrace t = record_forward(g, g.constant(x), params);
  MiaOutput out;
  out.output = g.value(t.output);
  out.maps.z = g.value(t.z);
  out.maps.m = g.value(t.m);
  out.maps.wc = g.value(t.wc);
  out.maps.ws = t.ws ? g.value(*t.ws) : Tensor::ones(out.maps.m.shape());
  out.maps.a = broadcast_mul(out.maps.wc.reshaped(Shape{x.dim(0), x.dim(1), 1, 1}),
                             out.maps.ws.reshaped(Shape{x.dim(0), 1, x.dim(2), x.dim(3)}));
  return out;
}

std::string encode_pgm(const Tensor& map) {
  if (map.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "PGM export needs (H,W), got " + map.shape().to_string());
  }
  const std::size_t h = map.dim(0), w = map.dim(1);
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : map.data()) {
    out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

}  // namespace mia
