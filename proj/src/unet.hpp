// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "autograd.hpp"
#include "diffusion.hpp"
#include "tensor.hpp"

namespace sardiff {

struct UNetConfig {
  int base_channels = 32;
  std::vector<int> channel_mults{1, 2, 2};
  int num_res_blocks = 1;
  /// Width of the sinusoidal embedding and of the time MLP.
  int time_dim = 128;
  int norm_groups = 8;
  int sar_channels = 1;
  int out_channels = 3;
  /// Self-attention at the lowest resolution.
  bool attention = false;

  int levels() const { return static_cast<int>(channel_mults.size()); }
  /// Spatial sizes must be multiples of this.
  int spatial_multiple() const { return 1 << (levels() - 1); }
  void validate() const;
  bool operator==(const UNetConfig&) const = default;
};

/// Ordered collection of named arrays. Order is fixed by the architecture and
/// is the serialisation order.
template <class T>
class ParameterSet {
 public:
  int add(std::string name, Tensor<T> value);
  int find(const std::string& name) const;
  std::size_t size() const { return tensors_.size(); }
  /// Total number of scalars.
  std::size_t count() const;

  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }

  /// Same names and shapes, zero-filled.
  ParameterSet zeros_like() const;

  template <class U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, int> index_;
};

/// Sinusoidal step embedding: [sin(t w_0) .. sin(t w_{d/2-1}), cos(t w_0) ..],
/// w_k = 10000^(-2k/d). dim must be even.
std::vector<double> time_embedding(double t, int dim);

/// The SAR lift: one 1x1 convolution from C_s channels to 3.
struct ConditionEmbedder {
  Tensor<float> weight;  // (3, C_s, 1, 1)
  Tensor<float> bias;    // (1, 3, 1, 1)
};

ImageTensor embed_condition(const ConditionEmbedder& embedder, const ImageTensor& cond);

/// Conditional U-Net noise predictor. The parameter layout (and therefore the
/// parameter count) is a pure function of the config.
template <class T>
class UNet {
 public:
  /// Fresh parameters from a seeded initialiser.
  UNet(UNetConfig config, std::uint64_t seed);
  /// Adopts existing parameters; names and shapes must match the config.
  UNet(UNetConfig config, ParameterSet<T> params);

  const UNetConfig& config() const { return config_; }
  const ParameterSet<T>& parameters() const { return params_; }
  ParameterSet<T>& parameters() { return params_; }

  /// Tape vars for each parameter, in parameter order.
  std::vector<typename Tape<T>::Var> bind(Tape<T>& tape) const;

  /// Records the full predictor (condition lift included) on the tape and
  /// returns the eps estimate.
  typename Tape<T>::Var record(Tape<T>& tape, std::span<const typename Tape<T>::Var> params,
                               typename Tape<T>::Var xt, std::span<const int> t,
                               typename Tape<T>::Var cond) const;

  /// Inference without gradient bookkeeping.
  Tensor<T> forward(const Tensor<T>& xt, std::span<const int> t, const Tensor<T>& cond) const;

  ConditionEmbedder condition_embedder() const;

  /// Throws ShapeError if the inputs do not fit this network.
  void check_inputs(const Tensor<T>& xt, const Tensor<T>& cond) const;

 private:
  struct Conv { int w, b; };
  struct Norm { int g, b; };
  struct ResBlock {
    Norm n1;
    Conv c1;
    int temb_w, temb_b;
    Norm n2;
    Conv c2;
    int skip_w = -1, skip_b = -1;
  };
  struct AttnBlock {
    Norm n;
    Conv q, k, v, proj;
  };
  struct Level {
    std::vector<ResBlock> down_res;
    std::vector<AttnBlock> down_attn;
    int down_w = -1, down_b = -1;
    std::vector<ResBlock> up_res;
    std::vector<AttnBlock> up_attn;
    int up_w = -1, up_b = -1;
  };

  void build_layout(ParameterSet<T>* init_target, std::uint64_t seed);

  UNetConfig config_;
  ParameterSet<T> params_;
  Conv cond_{}, conv_in_{}, conv_out_{};
  int temb1_w_ = -1, temb1_b_ = -1, temb2_w_ = -1, temb2_b_ = -1;
  std::vector<Level> levels_;
  ResBlock mid1_{}, mid2_{};
  AttnBlock mid_attn_{};
  Norm norm_out_{};
};

extern template class UNet<float>;
extern template class UNet<double>;

/// Adapts a float U-Net to the sampler interface.
class UNetPredictor final : public NoisePredictor {
 public:
  explicit UNetPredictor(const UNet<float>& net) : net_(net) {}
  ImageTensor predict(const ImageTensor& xt, std::span<const int> t,
                      const ImageTensor& cond) const override {
    return net_.forward(xt, t, cond);
  }

 private:
  const UNet<float>& net_;
};

}  // namespace sardiff
