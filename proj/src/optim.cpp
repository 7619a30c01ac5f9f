// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/optim.hpp"

#include <cmath>

namespace gridlmp::nn {

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
  if (state.m1.empty()) {
    for (const Tensor* p : params) {
      state.m1.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.m2.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m1.size() != params.size()) {
    throw ShapeMismatch("adam_step: parameter list changed size");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeMismatch("adam_step: gradient shape does not match parameter");
    }
    state.m1[i] = state.beta1 * state.m1[i] + (1.0 - state.beta1) * p.grad;
    state.m2[i] = state.beta2 * state.m2[i].array() +
                  (1.0 - state.beta2) * p.grad.array().square();
    p.value.array() -= state.lr * (state.m1[i].array() / bc1) /
                       ((state.m2[i].array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace gridlmp::nn
