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

#include "mia/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.hpp"

namespace mia {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kBroadcastMul: return "broadcast_mul";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kReduceMean: return "reduce_mean";
    case OpKind::kReduceSum: return "reduce_sum";
    case OpKind::kReshape: return "reshape";
    case OpKind::kMaxPool: return "max_pool";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_ce";
    case OpKind::kDiceLoss: return "dice_loss";
    case OpKind::kUpsampleNearest: return "upsample_nearest";
    case OpKind::kConcatChannels: return "concat_channels";
  }
  return "unknown";
}

namespace {

Tensor map(const Tensor& x, double (*fn)(double)) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = fn(x[i]);
  return out;
}

double relu_scalar(double v) { return v > 0.0 ? v : 0.0; }

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + " expects rank " +
                                               std::to_string(rank) + ", got " +
                                               t.shape().to_string());
  }
}

// Reduced axes re-inserted as singletons so the gradient broadcasts back.
Shape keepdims_shape(const Shape& in, const std::vector<std::size_t>& axes) {
  std::vector<std::size_t> dims = in.dims();
  for (std::size_t a : axes) dims.at(a) = 1;
  return Shape(std::move(dims));
}

}  // namespace

NodeId Graph::push(Node node) {
  node.id = NodeId{nodes_.size()};
  if (node.kind != OpKind::kLeaf) {
    node.requires_grad = std::any_of(node.inputs.begin(), node.inputs.end(),
                                     [&](NodeId in) { return this->node(in).requires_grad; });
  }
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

NodeId Graph::constant(Tensor value, std::string label) {
  Node n;
  n.value = std::move(value);
  n.label = std::move(label);
  return push(std::move(n));
}

NodeId Graph::parameter(Tensor value, std::string label) {
  Node n;
  n.value = std::move(value);
  n.label = std::move(label);
  n.requires_grad = true;
  const NodeId id = push(std::move(n));
  parameter_ids_.push_back(id);
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a, b};
  n.value = broadcast_add(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Node n;
  n.kind = OpKind::kBroadcastMul;
  n.inputs = {a, b};
  n.value = broadcast_mul(value(a), value(b));
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_rhs) {
  Node n;
  n.kind = OpKind::kMatmul;
  n.inputs = {a, b};
  n.transpose_rhs = transpose_rhs;
  n.value = kernels::matmul(value(a), value(b), false, transpose_rhs);
  return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId kernel, std::size_t padding) {
  Node n;
  n.kind = OpKind::kConv2d;
  n.inputs = {x, kernel};
  n.padding = padding;
  n.value = kernels::conv2d(value(x), value(kernel), padding);
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) {
  Node n;
  n.kind = OpKind::kRelu;
  n.inputs = {x};
  n.value = map(value(x), relu_scalar);
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
  Node n;
  n.kind = OpKind::kSigmoid;
  n.inputs = {x};
  n.value = map(value(x), mia::sigmoid);
  return push(std::move(n));
}

NodeId Graph::reduce_mean(NodeId x, std::vector<std::size_t> axes) {
  Node n;
  n.kind = OpKind::kReduceMean;
  n.inputs = {x};
  n.value = mia::reduce_mean(value(x), axes);
  n.axes = std::move(axes);
  return push(std::move(n));
}

NodeId Graph::reduce_sum(NodeId x, std::vector<std::size_t> axes) {
  Node n;
  n.kind = OpKind::kReduceSum;
  n.inputs = {x};
  n.value = mia::reduce_sum(value(x), axes);
  n.axes = std::move(axes);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
  std::vector<std::size_t> axes(value(x).rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce_sum(x, std::move(axes));
}

NodeId Graph::reshape(NodeId x, Shape shape) {
  Node n;
  n.kind = OpKind::kReshape;
  n.inputs = {x};
  n.value = value(x).reshaped(std::move(shape));
  return push(std::move(n));
}

NodeId Graph::max_pool(NodeId x) {
  const Tensor& in = value(x);
  require_rank(in, 4, "max_pool");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw Error(ErrorCode::kBadShape, "max_pool needs even extents, got " + in.shape().to_string());
  }
  Node n;
  n.kind = OpKind::kMaxPool;
  n.inputs = {x};
  n.value = Tensor(Shape{N, C, H / 2, W / 2});
  n.argmax.resize(n.value.numel());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    const std::size_t base = plane * H * W;
    for (std::size_t i = 0; i < H / 2; ++i) {
      for (std::size_t j = 0; j < W / 2; ++j, ++o) {
        std::size_t best = base + 2 * i * W + 2 * j;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = base + (2 * i + di) * W + 2 * j + dj;
            if (in[idx] > in[best]) best = idx;
          }
        }
        n.value[o] = in[best];
        n.argmax[o] = best;
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId logits) {
  const Tensor& z = value(logits);
  require_rank(z, 2, "softmax");
  const std::size_t rows = z.dim(0), k = z.dim(1);
  Node n;
  n.kind = OpKind::kSoftmax;
  n.inputs = {logits};
  n.value = Tensor(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.data().data() + r * k;
    double* yr = n.value.data().data() + r * k;
    const double mx = *std::max_element(zr, zr + k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += (yr[c] = std::exp(zr[c] - mx));
    for (std::size_t c = 0; c < k; ++c) yr[c] /= total;
  }
  return push(std::move(n));
}

NodeId Graph::softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
  const Tensor& z = value(logits);
  require_rank(z, 2, "softmax_cross_entropy");
  const std::size_t rows = z.dim(0), k = z.dim(1);
  if (labels.size() != rows) {
    throw Error(ErrorCode::kShapeMismatch, "label count " + std::to_string(labels.size()) +
                                               " vs batch " + std::to_string(rows));
  }
  Node n;
  n.kind = OpKind::kSoftmaxCrossEntropy;
  n.inputs = {logits};
  n.saved = Tensor(z.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(labels[r]) +
                                                   " outside [0," + std::to_string(k) + ")");
    }
    const double* zr = z.data().data() + r * k;
    double* pr = n.saved.data().data() + r * k;
    const double mx = *std::max_element(zr, zr + k);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) total += (pr[c] = std::exp(zr[c] - mx));
    for (std::size_t c = 0; c < k; ++c) pr[c] /= total;
    loss += mx + std::log(total) - zr[labels[r]];
  }
  n.value = Tensor::scalar(loss / static_cast<double>(rows));
  n.labels = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::dice_loss(NodeId pred, NodeId target, double epsilon) {
  const Tensor& p = value(pred);
  const Tensor& t = value(target);
  if (!(p.shape() == t.shape())) {
    throw Error(ErrorCode::kShapeMismatch,
                "dice_loss " + p.shape().to_string() + " vs " + t.shape().to_string());
  }
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    inter += p[i] * t[i];
    sp += p[i];
    st += t[i];
  }
  Node n;
  n.kind = OpKind::kDiceLoss;
  n.inputs = {pred, target};
  n.epsilon = epsilon;
  n.value = Tensor::scalar(1.0 - (2.0 * inter + epsilon) / (sp + st + epsilon));
  n.saved = Tensor(Shape{3}, {inter, sp, st});
  return push(std::move(n));
}

NodeId Graph::upsample_nearest(NodeId x) {
  const Tensor& in = value(x);
  require_rank(in, 4, "upsample_nearest");
  const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
  Node n;
  n.kind = OpKind::kUpsampleNearest;
  n.inputs = {x};
  n.value = Tensor(Shape{N, C, 2 * H, 2 * W});
  for (std::size_t plane = 0; plane < N * C; ++plane) {
    for (std::size_t i = 0; i < 2 * H; ++i) {
      for (std::size_t j = 0; j < 2 * W; ++j) {
        n.value[(plane * 2 * H + i) * 2 * W + j] = in[(plane * H + i / 2) * W + j / 2];
      }
    }
  }
  return push(std::move(n));
}

NodeId Graph::concat_channels(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_rank(ta, 4, "concat_channels");
  require_rank(tb, 4, "concat_channels");
  if (ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) || ta.dim(3) != tb.dim(3)) {
    throw Error(ErrorCode::kShapeMismatch,
                "concat_channels " + ta.shape().to_string() + " with " + tb.shape().to_string());
  }
  const std::size_t N = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const std::size_t plane = ta.dim(2) * ta.dim(3);
  Node n;
  n.kind = OpKind::kConcatChannels;
  n.inputs = {a, b};
  n.value = Tensor(Shape{N, ca + cb, ta.dim(2), ta.dim(3)});
  for (std::size_t s = 0; s < N; ++s) {
    std::copy_n(ta.data().begin() + s * ca * plane, ca * plane,
                n.value.data().begin() + s * (ca + cb) * plane);
    std::copy_n(tb.data().begin() + s * cb * plane, cb * plane,
                n.value.data().begin() + (s * (ca + cb) + ca) * plane);
  }
  return push(std::move(n));
}

void Graph::accumulate(NodeId id, const Tensor& g) {
  Node& n = at(id);
  if (!n.requires_grad) return;
  if (!n.grad) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.numel(); ++i) (*n.grad)[i] += g[i];
}

void Graph::propagate(const Node& n, const Tensor& g) {
  const auto in = [&](std::size_t k) -> const Node& { return node(n.inputs[k]); };
  switch (n.kind) {
    case OpKind::kLeaf:
      return;
    case OpKind::kAdd:
      accumulate(n.inputs[0], sum_to(g, in(0).value.shape()));
      accumulate(n.inputs[1], sum_to(g, in(1).value.shape()));
      return;
    case OpKind::kBroadcastMul:
      if (in(0).requires_grad) {
        accumulate(n.inputs[0], sum_to(broadcast_mul(g, in(1).value), in(0).value.shape()));
      }
      if (in(1).requires_grad) {
        accumulate(n.inputs[1], sum_to(broadcast_mul(g, in(0).value), in(1).value.shape()));
      }
      return;
    case OpKind::kMatmul: {
      const Tensor& a = in(0).value;
      const Tensor& b = in(1).value;
      if (in(0).requires_grad) {
        // dA = G·Bᵀ, or G·B when B entered transposed.
        accumulate(n.inputs[0], kernels::matmul(g, b, false, !n.transpose_rhs));
      }
      if (in(1).requires_grad) {
        accumulate(n.inputs[1], n.transpose_rhs ? kernels::matmul(g, a, true, false)
                                                : kernels::matmul(a, g, true, false));
      }
      return;
    }
    case OpKind::kConv2d:
      if (in(0).requires_grad) {
        accumulate(n.inputs[0], kernels::conv2d_grad_input(g, in(1).value, in(0).value.shape(),
                                                           n.padding));
      }
      if (in(1).requires_grad) {
        accumulate(n.inputs[1], kernels::conv2d_grad_kernel(g, in(0).value, in(1).value.shape(),
                                                            n.padding));
      }
      return;
    case OpKind::kRelu: {
      Tensor d(g.shape());
      const Tensor& x = in(0).value;
      for (std::size_t i = 0; i < g.numel(); ++i) d[i] = x[i] > 0.0 ? g[i] : 0.0;
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kSigmoid: {
      Tensor d(g.shape());
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const double s = n.value[i];
        d[i] = g[i] * s * (1.0 - s);
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kReduceMean:
    case OpKind::kReduceSum: {
      const Shape& xs = in(0).value.shape();
      Tensor expanded = broadcast_add(Tensor(xs), g.reshaped(keepdims_shape(xs, n.axes)));
      if (n.kind == OpKind::kReduceMean) {
        const double scale = static_cast<double>(n.value.numel()) / static_cast<double>(xs.numel());
        for (double& v : expanded.data()) v *= scale;
      }
      accumulate(n.inputs[0], expanded);
      return;
    }
    case OpKind::kReshape:
      accumulate(n.inputs[0], g.reshaped(in(0).value.shape()));
      return;
    case OpKind::kMaxPool: {
      Tensor d(in(0).value.shape());
      for (std::size_t o = 0; o < g.numel(); ++o) d[n.argmax[o]] += g[o];
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kSoftmax: {
      const std::size_t rows = n.value.dim(0), k = n.value.dim(1);
      Tensor d(n.value.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < k; ++c) dot += g[r * k + c] * n.value[r * k + c];
        for (std::size_t c = 0; c < k; ++c) {
          d[r * k + c] = n.value[r * k + c] * (g[r * k + c] - dot);
        }
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const std::size_t rows = n.saved.dim(0), k = n.saved.dim(1);
      const double scale = g.item() / static_cast<double>(rows);
      Tensor d = n.saved;
      for (std::size_t r = 0; r < rows; ++r) d[r * k + n.labels[r]] -= 1.0;
      for (double& v : d.data()) v *= scale;
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kDiceLoss: {
      const double inter = n.saved[0], sp = n.saved[1], st = n.saved[2];
      const double num = 2.0 * inter + n.epsilon;
      const double den = sp + st + n.epsilon;
      const double scale = g.item() / (den * den);
      // d/dp_i [1 - num/den] = -(2 t_i den - num) / den², symmetric in t.
      for (std::size_t k = 0; k < 2; ++k) {
        if (!in(k).requires_grad) continue;
        const Tensor& other = in(1 - k).value;
        Tensor d(other.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = -(2.0 * other[i] * den - num) * scale;
        accumulate(n.inputs[k], d);
      }
      return;
    }
    case OpKind::kUpsampleNearest: {
      const Shape& xs = in(0).value.shape();
      const std::size_t H = xs[2], W = xs[3];
      Tensor d(xs);
      for (std::size_t plane = 0; plane < xs[0] * xs[1]; ++plane) {
        for (std::size_t i = 0; i < 2 * H; ++i) {
          for (std::size_t j = 0; j < 2 * W; ++j) {
            d[(plane * H + i / 2) * W + j / 2] += g[(plane * 2 * H + i) * 2 * W + j];
          }
        }
      }
      accumulate(n.inputs[0], d);
      return;
    }
    case OpKind::kConcatChannels: {
      const Shape& sa = in(0).value.shape();
      const Shape& sb = in(1).value.shape();
      const std::size_t N = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
      Tensor da(sa), db(sb);
      for (std::size_t s = 0; s < N; ++s) {
        std::copy_n(g.data().begin() + s * (ca + cb) * plane, ca * plane,
                    da.data().begin() + s * ca * plane);
        std::copy_n(g.data().begin() + (s * (ca + cb) + ca) * plane, cb * plane,
                    db.data().begin() + s * cb * plane);
      }
      accumulate(n.inputs[0], da);
      accumulate(n.inputs[1], db);
      return;
    }
  }
}

std::map<NodeId, Tensor> Graph::backward(NodeId loss) {
  if (value(loss).numel() != 1) {
    throw Error(ErrorCode::kNonScalarLoss,
                "loss has shape " + value(loss).shape().to_string());
  }
  for (Node& n : nodes_) n.grad.reset();
  at(loss).grad = Tensor::ones(value(loss).shape());
  for (std::size_t i = loss.value + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.grad || !n.requires_grad) continue;
    const Tensor g = *n.grad;
    propagate(n, g);
  }
  std::map<NodeId, Tensor> grads;
  for (NodeId id : parameter_ids_) {
    const Node& n = node(id);
    grads.emplace(id, n.grad ? *n.grad : Tensor(n.value.shape()));
  }
  return grads;
}

GradCheckReport grad_check(const LossBuilder& builder, const Tensor& input,
                           std::vector<NamedTensor> params, double step, double tol) {
  const auto evaluate = [&](bool want_grads, std::vector<Tensor>* grads) {
    Graph g;
    const NodeId x = g.constant(input, "input");
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (const auto& [name, t] : params) ids.push_back(g.parameter(t, name));
    const NodeId loss = builder(g, x, ids);
    const double value = g.value(loss).item();
    if (want_grads) {
      auto all = g.backward(loss);
      for (NodeId id : ids) grads->push_back(all.at(id));
    }
    return value;
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    GradCheckEntry entry{params[p].first, 0.0, true};
    Tensor& theta = params[p].second;
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + step;
      const double up = evaluate(false, nullptr);
      theta[i] = saved - step;
      const double down = evaluate(false, nullptr);
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double exact = analytic[p][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      entry.max_rel_error = std::max(entry.max_rel_error, std::abs(exact - numeric) / denom);
    }
    entry.passed = entry.max_rel_error <= tol;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.passed = report.passed && entry.passed;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mia
