// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace sardiff {

/// Dense NCHW array. A single image is a tensor with n == 1; vectors and
/// matrices use trailing unit dimensions.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w, T fill = T(0)) : shape_{n, c, h, w} {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("negative tensor dimension");
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }

  static Tensor image(int c, int h, int w, T fill = T(0)) { return Tensor(1, c, h, w, fill); }

  int n() const { return shape_[0]; }
  int c() const { return shape_[1]; }
  int h() const { return shape_[2]; }
  int w() const { return shape_[3]; }
  const std::array<int, 4>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t plane() const { return static_cast<std::size_t>(h()) * w(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c()) * plane(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  T* sample(int n) { return data_.data() + n * sample_size(); }
  const T* sample(int n) const { return data_.data() + n * sample_size(); }
  T* channel(int n, int c) { return sample(n) + c * plane(); }
  const T* channel(int n, int c) const { return sample(n) + c * plane(); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Copy of samples [first, first + count).
  Tensor slice(int first, int count) const {
    if (first < 0 || count < 0 || first + count > n()) throw IndexError("tensor slice out of range");
    Tensor out(count, c(), h(), w());
    std::copy_n(sample(first), count * sample_size(), out.data());
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(n(), c(), h(), w());
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  std::string shape_string() const {
    return std::to_string(n()) + "x" + std::to_string(c()) + "x" + std::to_string(h()) + "x" +
           std::to_string(w());
  }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

using ImageTensor = Tensor<float>;

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

/// Stacks single images (n == 1 each, identical C/H/W) along the batch axis.
template <class T>
Tensor<T> stack(std::span<const Tensor<T>> images) {
  if (images.empty()) return {};
  const auto& first = images.front();
  int total = 0;
  for (const auto& im : images) {
    if (im.c() != first.c() || im.h() != first.h() || im.w() != first.w())
      throw ShapeError("stack: images differ in shape");
    total += im.n();
  }
  Tensor<T> out(total, first.c(), first.h(), first.w());
  T* dst = out.data();
  for (const auto& im : images) dst = std::copy(im.storage().begin(), im.storage().end(), dst);
  return out;
}

}  // namespace sardiff
