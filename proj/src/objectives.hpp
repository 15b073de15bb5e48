// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "blur.hpp"
#include "diffusion.hpp"
#include "unet.hpp"

namespace sardiff {

struct LossBreakdown {
  double simple = 0.0;
  double color = 0.0;
  double total = 0.0;
  double color_weight = 1.0;
};

/// Mean squared error over every element.
double simple_loss(const ImageTensor& eps, const ImageTensor& eps_hat);

/// MSE between the blurred ground truth and the blurred reconstruction.
double color_loss(const ImageTensor& x0, const ImageTensor& x0_pred, const BlurSpec& spec);

/// Breakdown for an externally supplied noise estimate (no gradients).
LossBreakdown loss_from_prediction(const ImageTensor& x0, const ImageTensor& xt,
                                   std::span<const int> t, const ImageTensor& eps,
                                   const ImageTensor& eps_hat, const NoiseSchedule& sched,
                                   const BlurSpec& spec, double color_weight);

/// Generic predictor path: x_t = q_sample(x0, t, eps), eps_hat = predictor(x_t, t, c_s),
/// x0' = predict_x0_from_eps(x_t, t, eps_hat).
LossBreakdown training_loss(const NoisePredictor& predictor, const ImageTensor& x0,
                            const ImageTensor& cond, std::span<const int> t,
                            const ImageTensor& eps, const NoiseSchedule& sched,
                            const BlurSpec& spec, double color_weight);

/// Same objective on the U-Net, accumulating d(total)/d(parameter) into grads
/// when it is non-null (grads must be shaped like the parameters).
template <class T>
LossBreakdown training_loss(const UNet<T>& net, const Tensor<T>& x0, const Tensor<T>& cond,
                            std::span<const int> t, const Tensor<T>& eps,
                            const NoiseSchedule& sched, const BlurSpec& spec, double color_weight,
                            ParameterSet<T>* grads);

}  // namespace sardiff
