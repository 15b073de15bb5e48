// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "diffusion.hpp"

#include <cmath>
#include <string>

#include "rng.hpp"

namespace sardiff {

const char* to_string(VarianceMode mode) {
  return mode == VarianceMode::kBeta ? "beta" : "beta_tilde";
}

VarianceMode variance_mode_from_string(const std::string& name) {
  if (name == "beta") return VarianceMode::kBeta;
  if (name == "beta_tilde") return VarianceMode::kBetaTilde;
  throw ParameterError("variance_mode: expected \"beta\" or \"beta_tilde\", got \"" + name + "\"");
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw IndexError("step index " + std::to_string(t) + " outside [1, " +
                     std::to_string(steps()) + "]");
  }
}

bool NoiseSchedule::same_fingerprint(const NoiseSchedule& o) const {
  return steps() == o.steps() && beta_start_ == o.beta_start_ && beta_end_ == o.beta_end_ &&
         mode_ == o.mode_ && terminal_noise_ == o.terminal_noise_;
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end,
                                   VarianceMode mode, bool terminal_noise) {
  if (steps < 1) throw ParameterError("T: must be >= 1, got " + std::to_string(steps));
  if (!(beta_start > 0.0)) throw ParameterError("beta_start: must be > 0");
  if (!(beta_end < 1.0)) throw ParameterError("beta_end: must be < 1");
  if (!(beta_start <= beta_end)) throw ParameterError("beta_start: must be <= beta_end");

  NoiseSchedule s;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.mode_ = mode;
  s.terminal_noise_ = terminal_noise;
  const auto n = static_cast<std::size_t>(steps);
  s.betas_.resize(n);
  s.alphas_.resize(n);
  s.alpha_bars_.resize(n);
  s.sigmas_.resize(n);

  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const double beta = i + 1 == n ? beta_end : beta_start + (beta_end - beta_start) * frac;
    s.betas_[i] = steps == 1 ? beta_start : beta;
    s.alphas_[i] = 1.0 - s.betas_[i];
    const double prev = prod;
    prod *= s.alphas_[i];
    s.alpha_bars_[i] = prod;
    const double var = mode == VarianceMode::kBeta
                           ? s.betas_[i]
                           : (1.0 - prev) / (1.0 - prod) * s.betas_[i];
    s.sigmas_[i] = std::sqrt(var);
  }
  if (!terminal_noise) s.sigmas_[0] = 0.0;
  return s;
}

namespace {

template <class T>
void check_steps(const Tensor<T>& x, std::span<const int> t, const NoiseSchedule& sched) {
  if (static_cast<int>(t.size()) != x.n()) {
    throw ShapeError("expected one step index per sample: " + std::to_string(t.size()) +
                     " indices for batch of " + std::to_string(x.n()));
  }
  for (int ti : t) sched.check_step(ti);
}

// out = (a_n * x + b_n * y) / d_n per sample, evaluated in double.
template <class T>
Tensor<T> per_sample_combine(const Tensor<T>& x, const Tensor<T>& y, std::span<const double> a,
                             std::span<const double> b, std::span<const double> d) {
  Tensor<T> out(x.n(), x.c(), x.h(), x.w());
  const std::size_t per = x.sample_size();
  for (int n = 0; n < x.n(); ++n) {
    const T* px = x.sample(n);
    const T* py = y.sample(n);
    T* po = out.sample(n);
    for (std::size_t i = 0; i < per; ++i)
      po[i] = static_cast<T>((a[n] * px[i] + b[n] * py[i]) / d[n]);
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, std::span<const int> t, const Tensor<T>& eps,
                   const NoiseSchedule& sched) {
  require_same_shape(x0, eps, "q_sample");
  check_steps(x0, t, sched);
  std::vector<double> a(t.size()), b(t.size()), d(t.size(), 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ab = sched.alpha_bar(t[i]);
    a[i] = std::sqrt(ab);
    b[i] = std::sqrt(1.0 - ab);
  }
  return per_sample_combine(x0, eps, a, b, d);
}

template <class T>
Tensor<T> q_sample(const Tensor<T>& x0, int t, const Tensor<T>& eps, const NoiseSchedule& sched) {
  std::vector<int> ts(static_cast<std::size_t>(x0.n()), t);
  return q_sample(x0, std::span<const int>(ts), eps, sched);
}

template <class T>
Tensor<T> predict_x0_from_eps(const Tensor<T>& xt, std::span<const int> t, const Tensor<T>& eps,
                              const NoiseSchedule& sched) {
  require_same_shape(xt, eps, "predict_x0_from_eps");
  check_steps(xt, t, sched);
  std::vector<double> a(t.size(), 1.0), b(t.size()), d(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ab = sched.alpha_bar(t[i]);
    b[i] = -std::sqrt(1.0 - ab);
    d[i] = std::sqrt(ab);
  }
  return per_sample_combine(xt, eps, a, b, d);
}

template <class T>
Tensor<T> predict_x0_from_eps(const Tensor<T>& xt, int t, const Tensor<T>& eps,
                              const NoiseSchedule& sched) {
  std::vector<int> ts(static_cast<std::size_t>(xt.n()), t);
  return predict_x0_from_eps(xt, std::span<const int>(ts), eps, sched);
}

#define SARDIFF_INSTANTIATE(T)                                                                  \
  template Tensor<T> q_sample(const Tensor<T>&, std::span<const int>, const Tensor<T>&,         \
                              const NoiseSchedule&);                                            \
  template Tensor<T> q_sample(const Tensor<T>&, int, const Tensor<T>&, const NoiseSchedule&);   \
  template Tensor<T> predict_x0_from_eps(const Tensor<T>&, std::span<const int>,                \
                                         const Tensor<T>&, const NoiseSchedule&);               \
  template Tensor<T> predict_x0_from_eps(const Tensor<T>&, int, const Tensor<T>&,               \
                                         const NoiseSchedule&);
SARDIFF_INSTANTIATE(float)
SARDIFF_INSTANTIATE(double)
#undef SARDIFF_INSTANTIATE

ImageTensor posterior_step(const ImageTensor& xt, int t, const ImageTensor& eps_hat,
                           const ImageTensor& z, const NoiseSchedule& sched) {
  require_same_shape(xt, eps_hat, "posterior_step");
  sched.check_step(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha(t));
  const auto a = static_cast<float>(inv_sqrt_alpha);
  const auto b =
      static_cast<float>(-inv_sqrt_alpha * sched.beta(t) / std::sqrt(1.0 - sched.alpha_bar(t)));
  const bool noisy = t > 1 && sched.sigma(t) > 0.0;
  if (noisy) require_same_shape(xt, z, "posterior_step noise");
  const auto sigma = static_cast<float>(sched.sigma(t));

  ImageTensor out(xt.n(), xt.c(), xt.h(), xt.w());
  for (std::size_t i = 0; i < out.size(); ++i) {
    float mu = a * xt[i] + b * eps_hat[i];
    out[i] = noisy ? mu + sigma * z[i] : mu;
  }
  return out;
}

ImageTensor sample(const NoisePredictor& predictor, const ImageTensor& cond,
                   const NoiseSchedule& sched, std::span<const std::uint64_t> seeds,
                   const SampleOptions& options) {
  if (static_cast<int>(seeds.size()) != cond.n()) {
    throw ShapeError("sample: one seed per conditioning tile required");
  }
  const int n = cond.n();
  const int channels = options.channels;
  ImageTensor x(n, channels, cond.h(), cond.w());
  std::vector<Rng> rngs;
  rngs.reserve(seeds.size());
  for (auto s : seeds) rngs.emplace_back(derive_seed(s, kStreamSample));
  auto draw = [&](ImageTensor& dst) {
    for (int i = 0; i < n; ++i)
      rngs[i].fill_normal(std::span<float>(dst.sample(i), dst.sample_size()));
  };
  draw(x);

  ImageTensor z(n, channels, cond.h(), cond.w());
  std::vector<int> ts(static_cast<std::size_t>(n));
  for (int t = sched.steps(); t >= 1; --t) {
    std::fill(ts.begin(), ts.end(), t);
    ImageTensor eps_hat = predictor.predict(x, ts, cond);
    if (!eps_hat.same_shape(x)) {
      throw ShapeError("sample: predictor returned " + eps_hat.shape_string() + " for input " +
                       x.shape_string());
    }
    if (options.clip_x0) {
      const double ab = sched.alpha_bar(t);
      const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = std::clamp((x[i] - sb * eps_hat[i]) / sa, -1.0, 1.0);
        eps_hat[i] = static_cast<float>((x[i] - sa * x0) / sb);
      }
    }
    if (t > 1) draw(z);
    x = posterior_step(x, t, eps_hat, z, sched);
    if (options.progress) options.progress(t);
  }
  for (auto& v : x.storage()) v = std::clamp(v, -1.0f, 1.0f);
  return x;
}

ImageTensor sample(const NoisePredictor& predictor, const ImageTensor& cond,
                   const NoiseSchedule& sched, std::uint64_t seed, int channels) {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cond.n()));
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(seed, i);
  SampleOptions options;
  options.channels = channels;
  return sample(predictor, cond, sched, seeds, options);
}

}  // namespace sardiff
