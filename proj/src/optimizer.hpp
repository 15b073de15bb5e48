// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "unet.hpp"

namespace sardiff {

/// min(step / warmup_steps, 1) * peak_lr; no decay afterwards.
double lr_at(std::int64_t step, double peak_lr, std::int64_t warmup_steps);

struct AdamWParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::int64_t step = 0;  // completed updates
  ParameterSet<float> m;
  ParameterSet<float> v;

  static AdamState zeros_like(const ParameterSet<float>& params);
};

/// Decoupled decay p -= lr * wd * p, then the bias-corrected Adam update.
/// Throws NumericError naming the step and parameter on a non-finite gradient.
void adamw_step(ParameterSet<float>& params, const ParameterSet<float>& grads, AdamState& state,
                double lr, const AdamWParams& hp);

/// Euclidean norm over every gradient entry.
double global_norm(const ParameterSet<float>& grads);
/// Rescales grads so their global norm is at most max_norm; returns the norm before.
double clip_global_norm(ParameterSet<float>& grads, double max_norm);

/// ema = decay * ema + (1 - decay) * params.
void ema_update(ParameterSet<float>& ema, const ParameterSet<float>& params, double decay);

}  // namespace sardiff
