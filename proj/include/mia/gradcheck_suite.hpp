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

#include <string>
#include <vector>

#include "mia/autograd.hpp"

namespace mia {

struct SuiteOptions {
  bool full = false;    // add end-to-end attention and backbone checks
  double step = 1e-5;
  double tol = 1e-4;    // primitives and attention blocks
  double model_tol = 1e-3;  // whole backbones
  int seeds = 5;
};

struct SuiteCase {
  std::string name;
  double tol = 0.0;
  GradCheckReport report;
};

/// Finite-difference checks of every primitive adjoint on random shapes
/// (extents 1..4, inputs in [-2,2]), then in full mode the attention block on
/// C ∈ {2,4,8}, H = W ∈ {3,5,7} over three seeds and both backbones.
std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& options);

/// Gradient check of sum(X') through one attention block.
GradCheckReport check_attention_block(std::size_t channels, std::size_t extent,
                                      std::size_t reduction, std::uint64_t seed, double step,
                                      double tol);

}  // namespace mia
