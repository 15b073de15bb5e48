// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "optimizer.hpp"

#include <cmath>

#include "errors.hpp"

namespace sardiff {

double lr_at(std::int64_t step, double peak_lr, std::int64_t warmup_steps) {
  if (step < 0) throw ParameterError("lr_at: step must be >= 0");
  if (warmup_steps < 1) throw ParameterError("lr_at: warmup_steps must be >= 1");
  if (step >= warmup_steps) return peak_lr;
  return static_cast<double>(step) / static_cast<double>(warmup_steps) * peak_lr;
}

AdamState AdamState::zeros_like(const ParameterSet<float>& params) {
  return AdamState{0, params.zeros_like(), params.zeros_like()};
}

void adamw_step(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
                double lr, const AdamWParams& hp) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ShapeError("adamw_step: parameter, gradient and moment sets differ in length");
  const std::int64_t step = state.step + 1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(params[i]))
      throw ShapeError("adamw_step: gradient shape mismatch for " + params.name(i));
    for (float g : grads[i].storage())
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at step " + std::to_string(step) +
                           " in parameter " + params.name(i));
  }
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  const double decay = 1.0 - lr * hp.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].data();
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    const float* g = grads[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double gk = g[k];
      const double mk = hp.beta1 * m[k] + (1.0 - hp.beta1) * gk;
      const double vk = hp.beta2 * v[k] + (1.0 - hp.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = (mk / bc1) / (std::sqrt(vk / bc2) + hp.eps);
      p[k] = static_cast<float>(p[k] * decay - lr * update);
    }
  }
  state.step = step;
}

double global_norm(const ParameterSet<float>& grads) {
  double ss = 0;
  for (const auto& t : grads.tensors())
    for (float g : t.storage()) ss += static_cast<double>(g) * g;
  return std::sqrt(ss);
}

double clip_global_norm(ParameterSet<float>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& t : grads.tensors())
      for (float& g : t.storage()) g *= scale;
  }
  return norm;
}

void ema_update(ParameterSet<float>& ema, const ParameterSet<float>& params, double decay) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* e = ema[i].data();
    const float* p = params[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k)
      e[k] = static_cast<float>(decay * e[k] + (1.0 - decay) * p[k]);
  }
}

}  // namespace sardiff
