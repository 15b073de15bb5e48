// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "objectives.hpp"

#include <cmath>

namespace sardiff {

namespace {

template <class T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace

double simple_loss(const ImageTensor& eps, const ImageTensor& eps_hat) {
  require_same_shape(eps, eps_hat, "simple_loss");
  return mse(eps, eps_hat);
}

double color_loss(const ImageTensor& x0, const ImageTensor& x0_pred, const BlurSpec& spec) {
  require_same_shape(x0, x0_pred, "color_loss");
  return mse(gaussian_blur(x0, spec), gaussian_blur(x0_pred, spec));
}

LossBreakdown loss_from_prediction(const ImageTensor& x0, const ImageTensor& xt,
                                   std::span<const int> t, const ImageTensor& eps,
                                   const ImageTensor& eps_hat, const NoiseSchedule& sched,
                                   const BlurSpec& spec, double color_weight) {
  LossBreakdown out;
  out.color_weight = color_weight;
  out.simple = simple_loss(eps, eps_hat);
  out.color = color_loss(x0, predict_x0_from_eps(xt, t, eps_hat, sched), spec);
  out.total = out.simple + color_weight * out.color;
  return out;
}

LossBreakdown training_loss(const NoisePredictor& predictor, const ImageTensor& x0,
                            const ImageTensor& cond, std::span<const int> t,
                            const ImageTensor& eps, const NoiseSchedule& sched,
                            const BlurSpec& spec, double color_weight) {
  const ImageTensor xt = q_sample(x0, t, eps, sched);
  const ImageTensor eps_hat = predictor.predict(xt, t, cond);
  return loss_from_prediction(x0, xt, t, eps, eps_hat, sched, spec, color_weight);
}

template <class T>
LossBreakdown training_loss(const UNet<T>& net, const Tensor<T>& x0, const Tensor<T>& cond,
                            std::span<const int> t, const Tensor<T>& eps,
                            const NoiseSchedule& sched, const BlurSpec& spec, double color_weight,
                            ParameterSet<T>* grads) {
  require_same_shape(x0, eps, "training_loss");
  if (static_cast<int>(t.size()) != x0.n()) throw ShapeError("one step index per sample required");
  const int N = x0.n();

  // x_t and the x0' affine map, computed in double from the schedule.
  Tensor<T> xt(N, x0.c(), x0.h(), x0.w());
  Tensor<T> offset(N, x0.c(), x0.h(), x0.w());
  std::vector<T> eps_scale(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    sched.check_step(t[n]);
    const double ab = sched.alpha_bar(t[n]);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    eps_scale[n] = static_cast<T>(-sb / sa);
    for (std::size_t i = 0; i < x0.sample_size(); ++i) {
      const T v = static_cast<T>(sa * x0.sample(n)[i] + sb * eps.sample(n)[i]);
      xt.sample(n)[i] = v;
      offset.sample(n)[i] = static_cast<T>(v / sa);
    }
  }

  Tape<T> tape(grads != nullptr);
  const auto params = net.bind(tape);
  const auto xt_var = tape.constant(xt);
  const auto eps_hat = net.record(tape, params, xt_var, t, tape.constant(cond));
  const auto simple = tape.mse(eps_hat, eps);
  const auto x0_pred = tape.affine_per_sample(eps_hat, eps_scale, offset);
  const auto color = tape.mse(tape.blur(x0_pred, spec), gaussian_blur(x0, spec));
  const auto total = tape.weighted_sum(simple, color, static_cast<T>(color_weight));

  LossBreakdown out;
  out.color_weight = color_weight;
  out.simple = tape.value(simple)[0];
  out.color = tape.value(color)[0];
  out.total = out.simple + color_weight * out.color;

  if (grads) {
    tape.backward(total);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor<T> g = tape.take_grad(params[i]);
      Tensor<T>& dst = (*grads)[i];
      if (g.empty()) continue;
      for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
    }
  }
  return out;
}

template LossBreakdown training_loss(const UNet<float>&, const Tensor<float>&,
                                     const Tensor<float>&, std::span<const int>,
                                     const Tensor<float>&, const NoiseSchedule&, const BlurSpec&,
                                     double, ParameterSet<float>*);
template LossBreakdown training_loss(const UNet<double>&, const Tensor<double>&,
                                     const Tensor<double>&, std::span<const int>,
                                     const Tensor<double>&, const NoiseSchedule&, const BlurSpec&,
                                     double, ParameterSet<double>*);

}  // namespace sardiff
