// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#pragma once

#include <vector>

#include "gridlmp/tape.hpp"

namespace gridlmp::nn {

// Adaptive-moment estimation with bias correction.  Moments are allocated on
// the first step; shapes are pinned to the parameter list from then on.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m1;  // first moments, one per parameter
  std::vector<Matrix> m2;  // second moments
};

// One update of every parameter from its .grad.  Deterministic given state.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);

}  // namespace gridlmp::nn
