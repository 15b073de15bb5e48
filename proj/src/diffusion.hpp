// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace sardiff {

enum class VarianceMode { kBeta, kBetaTilde };

const char* to_string(VarianceMode mode);
VarianceMode variance_mode_from_string(const std::string& name);

/// Precomputed per-step tables, stored in double. Steps are 1-based at the
/// interface (t = 1 .. T); index t - 1 internally.
class NoiseSchedule {
 public:
  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  double alpha_bar(int t) const { return alpha_bars_[index(t)]; }
  /// alpha_bar(0) == 1 by convention.
  double alpha_bar_prev(int t) const { return t == 1 ? 1.0 : alpha_bar(t - 1); }
  double sigma(int t) const { return sigmas_[index(t)]; }

  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  VarianceMode variance_mode() const { return mode_; }
  bool terminal_noise() const { return terminal_noise_; }

  std::span<const double> betas() const { return betas_; }
  std::span<const double> alpha_bars() const { return alpha_bars_; }
  std::span<const double> sigmas() const { return sigmas_; }

  /// Throws IndexError unless 1 <= t <= T.
  void check_step(int t) const;

  /// Same T, endpoints (bit-exact) and variance mode.
  bool same_fingerprint(const NoiseSchedule& o) const;

 private:
  friend NoiseSchedule make_linear_schedule(int, double, double, VarianceMode, bool);
  std::size_t index(int t) const { return static_cast<std::size_t>(t - 1); }

  std::vector<double> betas_, alphas_, alpha_bars_, sigmas_;
  double beta_start_ = 0, beta_end_ = 0;
  VarianceMode mode_ = VarianceMode::kBeta;
  bool terminal_noise_ = false;
};

/// Betas linearly spaced from beta_start to beta_end inclusive. With
/// terminal_noise false, sigma(1) is forced to 0 (no noise on the last
/// denoising step).
NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end,
                                   VarianceMode mode = VarianceMode::kBeta,
                                   bool terminal_noise = false);

// Batched forms take one step index per sample (t.size() == x.n()).

// Float and double tensors are supported; arithmetic is done in double.

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, std::span<const int> t, const Tensor<T>& eps,
                   const NoiseSchedule& sched);
template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, int t, const Tensor<T>& eps, const NoiseSchedule& sched);

/// (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)
template <class T>
Tensor<T> predict_x0_from_eps(const Tensor<T>& xt, std::span<const int> t, const Tensor<T>& eps,
                              const NoiseSchedule& sched);
template <class T>
Tensor<T> predict_x0_from_eps(const Tensor<T>& xt, int t, const Tensor<T>& eps,
                              const NoiseSchedule& sched);

/// One reverse step: (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t z.
/// z is ignored at t == 1.
ImageTensor posterior_step(const ImageTensor& xt, int t, const ImageTensor& eps_hat,
                           const ImageTensor& z, const NoiseSchedule& sched);

/// Anything that maps (x_t, t per sample, SAR condition) to a noise estimate of
/// x_t's shape.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual ImageTensor predict(const ImageTensor& xt, std::span<const int> t,
                              const ImageTensor& cond) const = 0;
};

/// Called after each reverse step with the step just completed.
using SampleProgress = std::function<void(int t)>;

struct SampleOptions {
  int channels = 3;  // output channels
  /// Clamp the predicted x0 to [-1, 1] at every step and take eps_hat from
  /// the clamped value before the posterior step (DDPM's clipped sampler).
  bool clip_x0 = false;
  SampleProgress progress;
};

/// Ancestral sampling from x_T ~ N(0, I) down to t = 1, clamped to [-1, 1].
/// cond holds one SAR tile per output; each output's noise comes from its own
/// seed, so a tile's result is independent of what it is batched with.
ImageTensor sample(const NoisePredictor& predictor, const ImageTensor& cond,
                   const NoiseSchedule& sched, std::span<const std::uint64_t> seeds,
                   const SampleOptions& options = {});
ImageTensor sample(const NoisePredictor& predictor, const ImageTensor& cond,
                   const NoiseSchedule& sched, std::uint64_t seed, int channels = 3);

}  // namespace sardiff
