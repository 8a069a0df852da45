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

#include <gtest/gtest.h>

#include "mia/attention.hpp"
#include "mia/autograd.hpp"
#include "mia/gradcheck_suite.hpp"
#include "oracles.hpp"

namespace mia {
namespace {

TEST(BackwardTest, MeanSpreadsEvenly) {
  Graph g;
  const NodeId x = g.parameter(Tensor(Shape{2, 2}, {1, 2, 3, 4}), "x");
  const NodeId loss = g.reduce_mean(x, {0, 1});
  const auto grads = g.backward(loss);
  EXPECT_EQ(grads.at(x).values(), (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
}

TEST(BackwardTest, SigmoidAtZero) {
  Graph g;
  const NodeId x = g.parameter(Tensor::scalar(0.0), "x");
  const auto grads = g.backward(g.sigmoid(x));
  EXPECT_DOUBLE_EQ(grads.at(x).item(), 0.25);
}

TEST(BackwardTest, NonScalarLossRejected) {
  Graph g;
  const NodeId x = g.parameter(Tensor(Shape{2}), "x");
  try {
    g.backward(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonScalarLoss);
  }
}

TEST(BackwardTest, RepeatedBackwardIsIdentical) {
  Graph g;
  const NodeId x = g.parameter(oracle::random_tensor(Shape{2, 3}, 1), "x");
  const NodeId w = g.parameter(oracle::random_tensor(Shape{4, 3}, 2), "w");
  const NodeId y = g.sigmoid(g.matmul(x, w, true));
  const NodeId loss = g.sum(g.mul(y, y));
  const auto first = g.backward(loss);
  const auto second = g.backward(loss);
  for (const auto& [id, grad] : first) EXPECT_EQ(grad.values(), second.at(id).values());
}

TEST(BackwardTest, BroadcastGradsKeepInputShapes) {
  Graph g;
  const NodeId a = g.parameter(oracle::random_tensor(Shape{2, 1, 4}, 3), "a");
  const NodeId b = g.parameter(oracle::random_tensor(Shape{3, 1}, 4), "b");
  const auto grads = g.backward(g.sum(g.mul(a, b)));
  EXPECT_EQ(grads.at(a).shape(), Shape({2, 1, 4}));
  EXPECT_EQ(grads.at(b).shape(), Shape({3, 1}));
  // d/d a[i,0,k] of sum_j a[i,0,k]*b[j] is sum_j b[j].
  const Tensor& bv = g.value(b);
  const double bsum = bv[0] + bv[1] + bv[2];
  for (double v : grads.at(a).data()) EXPECT_NEAR(v, bsum, 1e-12);
}

TEST(GradCheckTest, LinearLayer) {
  const auto builder = [](Graph& g, NodeId x, std::span<const NodeId> p) {
    return g.sum(g.matmul(p[0], x));
  };
  const auto report = grad_check(builder, oracle::random_tensor(Shape{2, 1}, 5),
                                 {{"W", oracle::random_tensor(Shape{2, 2}, 6)}}, 1e-5, 1e-8);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(GradCheckTest, ReluAwayFromKink) {
  Tensor t = oracle::random_tensor(Shape{3, 3}, 7, 0.1, 2.0);
  for (std::size_t i = 0; i < t.numel(); i += 2) t[i] = -t[i];
  const auto builder = [](Graph& g, NodeId x, std::span<const NodeId> p) {
    return g.sum(g.mul(g.relu(p[0]), x));
  };
  const auto report = grad_check(builder, oracle::random_tensor(Shape{3, 3}, 8), {{"t", t}}, 1e-5, 1e-7);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradCheckTest, UnreachableParameter) {
  const auto builder = [](Graph& g, NodeId x, std::span<const NodeId>) { return g.sum(x); };
  const auto report = grad_check(builder, Tensor::ones(Shape{2}),
                                 {{"unused", oracle::random_tensor(Shape{3}, 9)}}, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.max_rel_error, 0.0);
}

TEST(GradCheckTest, MiaForwardSum) {
  const auto report = check_attention_block(4, 5, 2, 17, 1e-5, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
  EXPECT_EQ(report.entries.size(), 6u);
}

TEST(GradCheckSuiteTest, EveryPrimitivePasses) {
  SuiteOptions opts;
  const auto cases = run_gradcheck_suite(opts);
  ASSERT_GE(cases.size(), 16u);
  for (const auto& c : cases) EXPECT_TRUE(c.report.passed) << c.name << " " << c.report.max_rel_error;
}

}  // namespace
}  // namespace mia
