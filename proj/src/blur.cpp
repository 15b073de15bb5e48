// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "blur.hpp"

#include <cmath>
#include <string>

namespace sardiff {

void validate(const BlurSpec& spec) {
  if (spec.kernel_size < 1 || spec.kernel_size % 2 == 0) {
    throw ParameterError("blur kernel_size: must be odd and positive, got " +
                         std::to_string(spec.kernel_size));
  }
  if (!(spec.sigma > 0.0)) throw ParameterError("blur sigma: must be > 0");
}

std::vector<double> gaussian_taps(const BlurSpec& spec) {
  validate(spec);
  const int r = spec.kernel_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(spec.kernel_size));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * i * i / (spec.sigma * spec.sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (auto& v : taps) v /= sum;
  return taps;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

// One separable pass along rows (horizontal) or columns. adjoint scatters
// instead of gathering.
template <class T>
void pass(const T* src, T* dst, int h, int w, const std::vector<double>& taps, bool horizontal,
          bool adjoint) {
  const int r = static_cast<int>(taps.size()) / 2;
  const int len = horizontal ? w : h;
  const int lines = horizontal ? h : w;
  auto at = [&](int line, int pos) {
    return horizontal ? static_cast<std::size_t>(line) * w + pos
                      : static_cast<std::size_t>(pos) * w + line;
  };
  std::vector<double> acc(static_cast<std::size_t>(len));
  for (int line = 0; line < lines; ++line) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int pos = 0; pos < len; ++pos) {
      if (adjoint) {
        const double g = src[at(line, pos)];
        for (int k = -r; k <= r; ++k)
          acc[static_cast<std::size_t>(reflect_index(pos + k, len))] += taps[k + r] * g;
      } else {
        double s = 0.0;
        for (int k = -r; k <= r; ++k) s += taps[k + r] * src[at(line, reflect_index(pos + k, len))];
        acc[static_cast<std::size_t>(pos)] = s;
      }
    }
    for (int pos = 0; pos < len; ++pos) dst[at(line, pos)] = static_cast<T>(acc[pos]);
  }
}

template <class T>
Tensor<T> run(const Tensor<T>& img, const BlurSpec& spec, bool adjoint) {
  const auto taps = gaussian_taps(spec);
  Tensor<T> tmp(img.n(), img.c(), img.h(), img.w());
  Tensor<T> out(img.n(), img.c(), img.h(), img.w());
  for (int n = 0; n < img.n(); ++n) {
    for (int c = 0; c < img.c(); ++c) {
      // The adjoint of (V after H) is (H^T after V^T).
      pass(img.channel(n, c), tmp.channel(n, c), img.h(), img.w(), taps, !adjoint, adjoint);
      pass(tmp.channel(n, c), out.channel(n, c), img.h(), img.w(), taps, adjoint, adjoint);
    }
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> gaussian_blur(const Tensor<T>& img, const BlurSpec& spec) {
  return run(img, spec, false);
}

template <class T>
Tensor<T> gaussian_blur_adjoint(const Tensor<T>& grad, const BlurSpec& spec) {
  return run(grad, spec, true);
}

template Tensor<float> gaussian_blur(const Tensor<float>&, const BlurSpec&);
template Tensor<double> gaussian_blur(const Tensor<double>&, const BlurSpec&);
template Tensor<float> gaussian_blur_adjoint(const Tensor<float>&, const BlurSpec&);
template Tensor<double> gaussian_blur_adjoint(const Tensor<double>&, const BlurSpec&);

}  // namespace sardiff
