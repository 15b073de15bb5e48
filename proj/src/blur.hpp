// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "tensor.hpp"

namespace sardiff {

struct BlurSpec {
  int kernel_size = 21;
  double sigma = 3.0;
};

/// Throws ParameterError for even or non-positive sizes and non-positive sigma.
void validate(const BlurSpec& spec);

/// Normalised 1-D Gaussian taps, length kernel_size, summing to 1.
std::vector<double> gaussian_taps(const BlurSpec& spec);

/// Reflect-101 index (mirror without repeating the edge sample), folded as
/// often as needed so any radius is valid.
int reflect_index(int i, int n);

/// Per-channel separable blur with reflect padding; output shape = input shape.
template <class T>
Tensor<T> gaussian_blur(const Tensor<T>& img, const BlurSpec& spec);

/// Adjoint of gaussian_blur (needed for gradients: reflect padding makes the
/// operator non-symmetric near borders).
template <class T>
Tensor<T> gaussian_blur_adjoint(const Tensor<T>& grad, const BlurSpec& spec);

}  // namespace sardiff
