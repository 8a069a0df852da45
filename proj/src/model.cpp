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

#include "mia/model.hpp"

#include <cmath>
#include <random>

namespace mia {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kMia: return "mia";
    case Variant::kSeOnly: return "se_only";
    case Variant::kNone: return "none";
  }
  return "unknown";
}

Variant parse_variant(std::string_view s) {
  if (s == "mia") return Variant::kMia;
  if (s == "se_only") return Variant::kSeOnly;
  if (s == "none") return Variant::kNone;
  throw Error(ErrorCode::kInvalidConfig, "unknown variant '" + std::string(s) + "'");
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kMia: return "mia";
    case LayerKind::kUpsample2x: return "upsample2x_nearest";
    case LayerKind::kConcatSkip: return "concat_skip";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Each parameter draws from its own stream keyed by (seed, name), so models
// that differ only in their attention layers share every other parameter.
std::mt19937_64 param_rng(std::uint64_t seed, const std::string& name) {
  const std::uint64_t h = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

class ModelBuilder {
 public:
  ModelBuilder(std::string architecture, const Shape& input, Variant variant,
               const ModelOptions& options) {
    model_.architecture = std::move(architecture);
    model_.input = input;
    model_.variant = variant;
    model_.options = options;
  }

  void conv(const std::string& name, std::size_t in, std::size_t out) {
    model_.layers.push_back({LayerKind::kConv3x3, name, in, out});
    glorot(name + ".weight", Shape{out, in, 3, 3}, 9.0 * in, 9.0 * out);
    zeros(name + ".bias", Shape{out});
  }

  void linear(const std::string& name, std::size_t in, std::size_t out) {
    model_.layers.push_back({LayerKind::kLinear, name, in, out});
    glorot(name + ".weight", Shape{out, in}, in, out);
    zeros(name + ".bias", Shape{out});
  }

  void attention(const std::string& name, std::size_t channels) {
    LayerSpec spec{LayerKind::kMia, name, channels, channels};
    spec.enabled = model_.variant != Variant::kNone;
    model_.layers.push_back(spec);
    if (!spec.enabled) return;
    const std::size_t h = bottleneck_width(channels, model_.options.reduction);
    glorot(name + ".w1", Shape{h, channels}, channels, h);
    glorot(name + ".w2", Shape{channels, h}, h, channels);
    if (model_.options.attention_bias) {
      zeros(name + ".b1", Shape{h});
      zeros(name + ".b2", Shape{channels});
    }
    if (model_.variant == Variant::kMia) {
      constexpr double taps = MiaBlock::kKernelSize * MiaBlock::kKernelSize;
      glorot(name + ".conv_kernel", Shape{1, 1, MiaBlock::kKernelSize, MiaBlock::kKernelSize},
             taps, taps);
      zeros(name + ".conv_bias", Shape{1});
    }
  }

  void simple(LayerKind kind, const std::string& name) {
    model_.layers.push_back({kind, name});
  }

  void concat_skip(const std::string& name, std::size_t from) {
    LayerSpec spec{LayerKind::kConcatSkip, name};
    spec.skip_from = from;
    model_.layers.push_back(spec);
  }

  std::size_t size() const { return model_.layers.size(); }

  Model finish() {
    model_.layer_shapes();
    return std::move(model_);
  }

 private:
  void glorot(const std::string& name, const Shape& shape, double fan_in, double fan_out) {
    auto rng = param_rng(model_.options.seed, name);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    model_.parameters.emplace(name, Tensor::uniform(shape, -limit, limit, rng));
  }
  void zeros(const std::string& name, const Shape& shape) {
    model_.parameters.emplace(name, Tensor(shape));
  }

  Model model_;
};

void check_input(const Shape& input, std::size_t rank) {
  if (input.rank() != rank) {
    throw Error(ErrorCode::kBadShape, "model input must have rank " + std::to_string(rank) +
                                          ", got " + input.to_string());
  }
}

}  // namespace

Model build_mini_cnn(const Shape& input, std::size_t classes, Variant variant,
                     const ModelOptions& options) {
  check_input(input, 3);
  if (input[1] % 4 != 0 || input[2] % 4 != 0) {
    throw Error(ErrorCode::kBadShape,
                "mini_cnn needs H and W divisible by 4, got " + input.to_string());
  }
  if (classes < 1) throw Error(ErrorCode::kBadShape, "mini_cnn needs at least one class");
  ModelBuilder b("mini_cnn", input, variant, options);
  b.conv("conv1", input[0], 16);
  b.simple(LayerKind::kRelu, "relu1");
  b.attention("mia1", 16);
  b.simple(LayerKind::kMaxPool2x2, "pool1");
  b.conv("conv2", 16, 32);
  b.simple(LayerKind::kRelu, "relu2");
  b.attention("mia2", 32);
  b.simple(LayerKind::kMaxPool2x2, "pool2");
  b.simple(LayerKind::kFlatten, "flatten");
  b.linear("fc", 32 * (input[1] / 4) * (input[2] / 4), classes);
  return b.finish();
}

Model build_mini_segnet(const Shape& input, Variant variant, const ModelOptions& options) {
  check_input(input, 3);
  if (input[0] != 1 || input[1] % 2 != 0 || input[2] % 2 != 0) {
    throw Error(ErrorCode::kBadShape,
                "mini_segnet needs (1,H,W) with even H and W, got " + input.to_string());
  }
  ModelBuilder b("mini_segnet", input, variant, options);
  b.conv("enc1", 1, 8);
  b.simple(LayerKind::kRelu, "enc1_relu");
  const std::size_t skip = b.size() - 1;
  b.simple(LayerKind::kMaxPool2x2, "pool");
  b.conv("enc2", 8, 16);
  b.simple(LayerKind::kRelu, "enc2_relu");
  b.attention("mia", 16);
  b.simple(LayerKind::kUpsample2x, "up");
  b.concat_skip("skip", skip);
  b.conv("dec1", 24, 8);
  b.simple(LayerKind::kRelu, "dec1_relu");
  b.conv("head", 8, 1);
  b.simple(LayerKind::kSigmoid, "prob");
  return b.finish();
}

Model build_mini_flownet(std::size_t features, std::size_t classes, Variant variant,
                         const ModelOptions& options) {
  if (features < 1 || classes < 1) {
    throw Error(ErrorCode::kBadShape, "mini_flownet needs features and classes");
  }
  ModelBuilder b("mini_flownet", Shape{1, 1, features}, variant, options);
  b.conv("conv1", 1, 16);
  b.simple(LayerKind::kRelu, "relu1");
  b.attention("mia1", 16);
  b.simple(LayerKind::kFlatten, "flatten");
  b.linear("fc", 16 * features, classes);
  return b.finish();
}

Model build_model(std::string_view architecture, const Shape& input, std::size_t classes,
                  Variant variant, const ModelOptions& options) {
  if (architecture == "mini_cnn") return build_mini_cnn(input, classes, variant, options);
  if (architecture == "mini_segnet") return build_mini_segnet(input, variant, options);
  if (architecture == "mini_flownet") {
    check_input(input, 3);
    return build_mini_flownet(input[2], classes, variant, options);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown architecture '" + std::string(architecture) + "'");
}

std::vector<std::string> Model::layer_parameter_names(std::size_t layer) const {
  const std::string prefix = layers.at(layer).name + ".";
  std::vector<std::string> names;
  for (auto it = parameters.lower_bound(prefix);
       it != parameters.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it) {
    names.push_back(it->first);
  }
  return names;
}

std::size_t Model::layer_param_count(std::size_t layer) const {
  std::size_t count = 0;
  for (const auto& name : layer_parameter_names(layer)) count += parameters.at(name).numel();
  return count;
}

std::size_t Model::param_count() const {
  std::size_t count = 0;
  for (const auto& [name, t] : parameters) count += t.numel();
  return count;
}

MiaBlock Model::attention_block(std::size_t layer) const {
  const LayerSpec& spec = layers.at(layer);
  if (spec.kind != LayerKind::kMia || !spec.enabled) {
    throw Error(ErrorCode::kInvalidConfig, "layer '" + spec.name + "' is not an enabled attention block");
  }
  const std::string& p = spec.name;
  MiaBlock block(spec.in, options.reduction, parameters.contains(p + ".b1"),
                 parameters.contains(p + ".conv_kernel"));
  block.w1 = parameters.at(p + ".w1");
  block.w2 = parameters.at(p + ".w2");
  if (block.has_bias) {
    block.b1 = parameters.at(p + ".b1");
    block.b2 = parameters.at(p + ".b2");
  }
  if (block.has_spatial) {
    block.conv_kernel = parameters.at(p + ".conv_kernel");
    block.conv_bias = parameters.at(p + ".conv_bias");
  }
  return block;
}

std::vector<Shape> Model::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape cur = input;
  const auto fail = [&](const LayerSpec& l, const std::string& why) {
    throw Error(ErrorCode::kBadShape, "layer '" + l.name + "' (" + std::string(to_string(l.kind)) +
                                          ") on " + cur.to_string() + ": " + why);
  };
  for (const LayerSpec& l : layers) {
    switch (l.kind) {
      case LayerKind::kConv3x3:
        if (cur.rank() != 3 || cur[0] != l.in) fail(l, "channel mismatch");
        cur = Shape{l.out, cur[1], cur[2]};
        break;
      case LayerKind::kMia:
        if (cur.rank() != 3 || cur[0] != l.in) fail(l, "channel mismatch");
        break;
      case LayerKind::kMaxPool2x2:
        if (cur.rank() != 3 || cur[1] % 2 || cur[2] % 2) fail(l, "needs even H and W");
        cur = Shape{cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::kUpsample2x:
        if (cur.rank() != 3) fail(l, "needs (C,H,W)");
        cur = Shape{cur[0], 2 * cur[1], 2 * cur[2]};
        break;
      case LayerKind::kConcatSkip: {
        if (l.skip_from >= shapes.size()) fail(l, "skip source is not an earlier layer");
        const Shape& s = shapes[l.skip_from];
        if (cur.rank() != 3 || s.rank() != 3 || s[1] != cur[1] || s[2] != cur[2]) {
          fail(l, "skip source " + s.to_string() + " has different extent");
        }
        cur = Shape{cur[0] + s[0], cur[1], cur[2]};
        break;
      }
      case LayerKind::kFlatten:
        cur = Shape{cur.numel()};
        break;
      case LayerKind::kLinear:
        if (cur.rank() != 1 || cur[0] != l.in) fail(l, "unit mismatch");
        cur = Shape{l.out};
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

std::map<std::string, NodeId> bind_parameters(const Model& model, Graph& graph, bool trainable) {
  std::map<std::string, NodeId> ids;
  for (const auto& [name, t] : model.parameters) {
    ids.emplace(name, trainable ? graph.parameter(t, name) : graph.constant(t, name));
  }
  return ids;
}

ForwardPass model_forward(const Model& model, Graph& graph, NodeId x,
                          const std::map<std::string, NodeId>& params) {
  const Tensor& xv = graph.value(x);
  if (xv.rank() != model.input.rank() + 1 ||
      !std::equal(model.input.dims().begin(), model.input.dims().end(), xv.shape().dims().begin() + 1)) {
    throw Error(ErrorCode::kShapeMismatch, "input " + xv.shape().to_string() +
                                               " for a model expecting (N," +
                                               model.input.to_string().substr(1));
  }
  const std::size_t batch = xv.dim(0);
  const auto param = [&](const std::string& name) { return params.at(name); };
  const auto maybe = [&](const std::string& name) -> std::optional<NodeId> {
    auto it = params.find(name);
    if (it == params.end()) return std::nullopt;
    return it->second;
  };

  ForwardPass pass;
  std::vector<NodeId> outputs;
  NodeId cur = x;
  for (const LayerSpec& l : model.layers) {
    switch (l.kind) {
      case LayerKind::kConv3x3:
        cur = graph.conv2d(cur, param(l.name + ".weight"), 1);
        cur = graph.add(cur, graph.reshape(param(l.name + ".bias"), Shape{l.out, 1, 1}));
        break;
      case LayerKind::kRelu:
        cur = graph.relu(cur);
        break;
      case LayerKind::kSigmoid:
        cur = graph.sigmoid(cur);
        break;
      case LayerKind::kMaxPool2x2:
        cur = graph.max_pool(cur);
        break;
      case LayerKind::kMia: {
        if (!l.enabled) break;
        MiaNodes nodes;
        nodes.w1 = param(l.name + ".w1");
        nodes.w2 = param(l.name + ".w2");
        nodes.b1 = maybe(l.name + ".b1");
        nodes.b2 = maybe(l.name + ".b2");
        nodes.conv_kernel = maybe(l.name + ".conv_kernel");
        nodes.conv_bias = maybe(l.name + ".conv_bias");
        MiaTrace trace = record_forward(graph, cur, nodes);
        cur = trace.output;
        pass.attention.push_back(trace);
        break;
      }
      case LayerKind::kUpsample2x:
        cur = graph.upsample_nearest(cur);
        break;
      case LayerKind::kConcatSkip:
        cur = graph.concat_channels(cur, outputs.at(l.skip_from));
        break;
      case LayerKind::kFlatten:
        cur = graph.reshape(cur, Shape{batch, graph.value(cur).numel() / batch});
        break;
      case LayerKind::kLinear:
        cur = graph.add(graph.matmul(cur, param(l.name + ".weight"), true),
                        param(l.name + ".bias"));
        break;
    }
    outputs.push_back(cur);
  }
  pass.output = cur;
  return pass;
}

NodeId model_forward(const Model& model, Graph& graph, NodeId x) {
  return model_forward(model, graph, x, bind_parameters(model, graph, true)).output;
}

Tensor predict(const Model& model, const Tensor& x) {
  Graph graph;
  const auto params = bind_parameters(model, graph, false);
  return graph.value(model_forward(model, graph, graph.constant(x), params).output);
}

}  // namespace mia
