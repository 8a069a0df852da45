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

#include "mia/gradcheck_suite.hpp"

#include <functional>
#include <map>
#include <random>

#include "mia/attention.hpp"
#include "mia/data.hpp"
#include "mia/model.hpp"

namespace mia {

namespace {

using Rng = std::mt19937_64;

std::size_t extent(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

Tensor uniform(const Shape& s, Rng& rng, double lo = -2.0, double hi = 2.0) {
  return Tensor::uniform(s, lo, hi, rng);
}

// Values in [0.1, 2] with random sign, keeping finite differences off the
// ReLU kink.
Tensor away_from_zero(const Shape& s, Rng& rng) {
  Tensor t = Tensor::uniform(s, 0.1, 2.0, rng);
  for (double& v : t.data()) {
    if (rng() & 1) v = -v;
  }
  return t;
}

// Scalar loss Σ out ⊙ weights with fixed random weights, so that every
// output element carries a distinct upstream gradient.
NodeId weighted_sum(Graph& g, NodeId out, std::uint64_t seed) {
  Rng rng(seed);
  const NodeId w = g.constant(uniform(g.value(out).shape(), rng, -1.0, 1.0));
  return g.sum(g.mul(out, w));
}

Shape random_shape(Rng& rng, std::size_t rank) {
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) d = extent(rng);
  return Shape(dims);
}

// A shape broadcast-compatible with `s`: some dims collapsed to 1 and possibly
// leading dims dropped.
Shape broadcastable(const Shape& s, Rng& rng) {
  std::vector<std::size_t> dims = s.dims();
  for (auto& d : dims) {
    if (rng() % 2) d = 1;
  }
  const std::size_t drop = rng() % dims.size();
  return Shape(std::vector<std::size_t>(dims.begin() + drop, dims.end()));
}

struct PrimitiveCase {
  std::string name;
  std::function<std::pair<LossBuilder, std::vector<NamedTensor>>(Rng&, std::uint64_t)> make;
};

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  cases.push_back({"add", [](Rng& rng, std::uint64_t s) {
    const Shape a = random_shape(rng, 1 + rng() % 4);
    const Shape b = broadcastable(a, rng);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.add(p[0], p[1]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"a", uniform(a, rng)}, {"b", uniform(b, rng)}}};
  }});
  cases.push_back({"broadcast_mul", [](Rng& rng, std::uint64_t s) {
    const Shape a = random_shape(rng, 1 + rng() % 4);
    const Shape b = broadcastable(a, rng);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.mul(p[1], p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"a", uniform(a, rng)}, {"b", uniform(b, rng)}}};
  }});
  cases.push_back({"matmul", [](Rng& rng, std::uint64_t s) {
    const std::size_t m = extent(rng), k = extent(rng), n = extent(rng);
    const bool transpose = rng() % 2;
    const Shape b = transpose ? Shape{n, k} : Shape{k, n};
    LossBuilder f = [s, transpose](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.matmul(p[0], p[1], transpose), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"a", uniform(Shape{m, k}, rng)},
                                                 {"b", uniform(b, rng)}}};
  }});
  cases.push_back({"conv2d", [](Rng& rng, std::uint64_t s) {
    const std::size_t ksize = extent(rng, 1, 3);
    const std::size_t pad = rng() % ksize;
    const std::size_t h = std::max(extent(rng), ksize), w = std::max(extent(rng), ksize);
    const Shape x{extent(rng), extent(rng), h, w};
    const Shape k{extent(rng), x[1], ksize, ksize};
    LossBuilder f = [s, pad](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.conv2d(p[0], p[1], pad), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}, {"kernel", uniform(k, rng)}}};
  }});
  cases.push_back({"relu", [](Rng& rng, std::uint64_t s) {
    const Shape x = random_shape(rng, 1 + rng() % 4);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.relu(p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", away_from_zero(x, rng)}}};
  }});
  cases.push_back({"sigmoid", [](Rng& rng, std::uint64_t s) {
    const Shape x = random_shape(rng, 1 + rng() % 4);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.sigmoid(p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"reduce_mean", [](Rng& rng, std::uint64_t s) {
    const std::size_t rank = 1 + rng() % 4;
    const Shape x = random_shape(rng, rank);
    std::vector<std::size_t> axes;
    for (std::size_t a = 0; a < rank; ++a) {
      if (rng() % 2) axes.push_back(a);
    }
    if (axes.empty()) axes.push_back(rng() % rank);
    LossBuilder f = [s, axes](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.reduce_mean(p[0], axes), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"reduce_sum", [](Rng& rng, std::uint64_t s) {
    const std::size_t rank = 1 + rng() % 4;
    const Shape x = random_shape(rng, rank);
    std::vector<std::size_t> axes{rng() % rank};
    LossBuilder f = [s, axes](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.reduce_sum(p[0], axes), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"reshape", [](Rng& rng, std::uint64_t s) {
    const Shape x = random_shape(rng, 1 + rng() % 4);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      const std::size_t n = g.value(p[0]).numel();
      return weighted_sum(g, g.reshape(p[0], Shape{n}), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"max_pool", [](Rng& rng, std::uint64_t s) {
    const Shape x{extent(rng), extent(rng), 2 * extent(rng, 1, 2), 2 * extent(rng, 1, 2)};
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.max_pool(p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"softmax", [](Rng& rng, std::uint64_t s) {
    const Shape x{extent(rng), extent(rng)};
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.softmax(p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"softmax_ce", [](Rng& rng, std::uint64_t) {
    const std::size_t n = extent(rng), k = extent(rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng() % k);
    LossBuilder f = [labels](Graph& g, NodeId, std::span<const NodeId> p) {
      return g.softmax_cross_entropy(p[0], labels);
    };
    return std::pair{f, std::vector<NamedTensor>{{"logits", uniform(Shape{n, k}, rng)}}};
  }});
  cases.push_back({"dice_loss", [](Rng& rng, std::uint64_t) {
    const Shape x{extent(rng), 1, extent(rng), extent(rng)};
    LossBuilder f = [](Graph& g, NodeId, std::span<const NodeId> p) {
      return g.dice_loss(p[0], p[1]);
    };
    return std::pair{f, std::vector<NamedTensor>{{"pred", uniform(x, rng, 0.01, 0.99)},
                                                 {"target", uniform(x, rng, 0.0, 1.0)}}};
  }});
  cases.push_back({"upsample_nearest", [](Rng& rng, std::uint64_t s) {
    const Shape x = random_shape(rng, 4);
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.upsample_nearest(p[0]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"x", uniform(x, rng)}}};
  }});
  cases.push_back({"concat_channels", [](Rng& rng, std::uint64_t s) {
    const Shape a = random_shape(rng, 4);
    const Shape b{a[0], extent(rng), a[2], a[3]};
    LossBuilder f = [s](Graph& g, NodeId, std::span<const NodeId> p) {
      return weighted_sum(g, g.concat_channels(p[0], p[1]), s);
    };
    return std::pair{f, std::vector<NamedTensor>{{"a", uniform(a, rng)}, {"b", uniform(b, rng)}}};
  }});
  return cases;
}

void merge(GradCheckReport& into, const GradCheckReport& r) {
  for (const auto& e : r.entries) into.entries.push_back(e);
  into.max_rel_error = std::max(into.max_rel_error, r.max_rel_error);
  into.passed = into.passed && r.passed;
}

std::vector<NamedTensor> model_params(const Model& m) {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : m.parameters) out.emplace_back(name, t);
  return out;
}

LossBuilder model_loss(const Model& m, std::function<NodeId(Graph&, NodeId)> head) {
  return [m, head](Graph& g, NodeId x, std::span<const NodeId> p) {
    std::map<std::string, NodeId> ids;
    std::size_t i = 0;
    for (const auto& [name, t] : m.parameters) ids.emplace(name, p[i++]);
    return head(g, model_forward(m, g, x, ids).output);
  };
}

}  // namespace

GradCheckReport check_attention_block(std::size_t channels, std::size_t extent,
                                      std::size_t reduction, std::uint64_t seed, double step,
                                      double tol) {
  Rng rng(seed);
  MiaBlock block(channels, reduction);
  block.initialize(rng);
  // Nonzero biases so every parameter group is exercised away from its init.
  block.b1 = uniform(block.b1.shape(), rng, -0.5, 0.5);
  block.b2 = uniform(block.b2.shape(), rng, -0.5, 0.5);
  block.conv_bias = uniform(block.conv_bias.shape(), rng, -0.5, 0.5);
  const Tensor x = uniform(Shape{1, channels, extent, extent}, rng);
  LossBuilder f = [](Graph& g, NodeId in, std::span<const NodeId> p) {
    MiaNodes nodes{p[0], p[1], p[2], p[3], p[4], p[5]};
    return g.sum(record_forward(g, in, nodes).output);
  };
  return grad_check(f, x,
                    {{"w1", block.w1}, {"b1", block.b1}, {"w2", block.w2}, {"b2", block.b2},
                     {"conv_kernel", block.conv_kernel}, {"conv_bias", block.conv_bias}},
                    step, tol);
}

std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& options) {
  std::vector<SuiteCase> results;
  for (const auto& pc : primitive_cases()) {
    SuiteCase sc{pc.name, options.tol, {}};
    for (int seed = 0; seed < options.seeds; ++seed) {
      Rng rng(1000 + 17 * static_cast<std::uint64_t>(seed));
      auto [builder, params] = pc.make(rng, 7 + static_cast<std::uint64_t>(seed));
      merge(sc.report, grad_check(builder, Tensor::scalar(0.0), std::move(params), options.step,
                                  options.tol));
    }
    results.push_back(std::move(sc));
  }

  if (!options.full) {
    results.push_back({"mia_block(C=4,H=W=5)", options.tol,
                       check_attention_block(4, 5, 2, 1, options.step, options.tol)});
    return results;
  }

  for (std::size_t c : {2, 4, 8}) {
    for (std::size_t hw : {3, 5, 7}) {
      SuiteCase sc{"mia_block(C=" + std::to_string(c) + ",H=W=" + std::to_string(hw) + ")",
                   options.tol, {}};
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        merge(sc.report, check_attention_block(c, hw, 2, seed, options.step, options.tol));
      }
      results.push_back(std::move(sc));
    }
  }

  {
    Rng rng(42);
    const Model cnn = build_mini_cnn(Shape{3, 8, 8}, 4, Variant::kMia, {.reduction = 4, .seed = 3});
    const Tensor x = uniform(Shape{1, 3, 8, 8}, rng);
    auto loss = model_loss(cnn, [](Graph& g, NodeId out) {
      return g.softmax_cross_entropy(out, std::vector<int>{1});
    });
    results.push_back({"mini_cnn(1,3,8,8)", options.model_tol,
                       grad_check(loss, x, model_params(cnn), options.step, options.model_tol)});
  }
  {
    Rng rng(43);
    const Model seg = build_mini_segnet(Shape{1, 8, 8}, Variant::kMia, {.reduction = 4, .seed = 5});
    const Tensor x = uniform(Shape{1, 1, 8, 8}, rng);
    Tensor target(Shape{1, 1, 8, 8});
    for (double& v : target.data()) v = static_cast<double>(rng() % 2);
    auto loss = model_loss(seg, [target](Graph& g, NodeId out) {
      return g.dice_loss(out, g.constant(target));
    });
    results.push_back({"mini_segnet(1,1,8,8)", options.model_tol,
                       grad_check(loss, x, model_params(seg), options.step, options.model_tol)});
  }
  return results;
}

}  // namespace mia
