// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "unet.hpp"

#include <cmath>

#include "rng.hpp"

namespace sardiff {

void UNetConfig::validate() const {
  auto fail = [](const std::string& m) { throw ParameterError("model config: " + m); };
  if (base_channels < 1) fail("base_channels must be >= 1");
  if (channel_mults.empty()) fail("channel_mults must not be empty");
  for (int m : channel_mults)
    if (m < 1) fail("channel_mults entries must be >= 1");
  if (num_res_blocks < 1) fail("num_res_blocks must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) fail("time_dim must be even and >= 2");
  if (norm_groups < 1) fail("norm_groups must be >= 1");
  if (sar_channels < 1) fail("sar_channels must be >= 1");
  if (out_channels < 1) fail("out_channels must be >= 1");
  for (int m : channel_mults)
    if ((base_channels * m) % norm_groups != 0)
      fail("norm_groups must divide every level width (base_channels * mult)");
}

template <class T>
int ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (index_.count(name)) throw ParameterError("duplicate parameter name " + name);
  index_.emplace(name, static_cast<int>(tensors_.size()));
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return static_cast<int>(tensors_.size() - 1);
}

template <class T>
int ParameterSet<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

template <class T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <class T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& s = tensors_[i].shape();
    out.add(names_[i], Tensor<T>(s[0], s[1], s[2], s[3]));
  }
  return out;
}

template class ParameterSet<float>;
template class ParameterSet<double>;

std::vector<double> time_embedding(double t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw ParameterError("time embedding dim must be even, got " + std::to_string(dim));
  const int half = dim / 2;
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / dim);
    out[k] = std::sin(t * w);
    out[half + k] = std::cos(t * w);
  }
  return out;
}

ImageTensor embed_condition(const ConditionEmbedder& embedder, const ImageTensor& cond) {
  const int cs = embedder.weight.c();
  const int co = embedder.weight.n();
  if (cond.c() != cs) {
    throw ShapeError("embed_condition: SAR input has " + std::to_string(cond.c()) +
                     " channels, embedder expects " + std::to_string(cs));
  }
  ImageTensor out(cond.n(), co, cond.h(), cond.w());
  for (int n = 0; n < cond.n(); ++n)
    for (int o = 0; o < co; ++o) {
      float* dst = out.channel(n, o);
      std::fill_n(dst, cond.plane(), embedder.bias[o]);
      for (int c = 0; c < cs; ++c) {
        const float w = embedder.weight.at(o, c, 0, 0);
        const float* src = cond.channel(n, c);
        for (std::size_t i = 0; i < cond.plane(); ++i) dst[i] += w * src[i];
      }
    }
  return out;
}

namespace {

// Registers parameters in a fixed order and initialises them.
template <class T>
class LayoutBuilder {
 public:
  LayoutBuilder(ParameterSet<T>& set, std::uint64_t seed) : set_(set), rng_(seed) {}

  int kernel(const std::string& name, int cout, int cin, int k, bool zero) {
    Tensor<T> w(cout, cin, k, k);
    if (!zero) {
      const double stddev = 1.0 / std::sqrt(static_cast<double>(cin * k * k));
      for (auto& v : w.storage()) v = static_cast<T>(stddev * rng_.normal());
    }
    return set_.add(name, std::move(w));
  }
  int bias(const std::string& name, int c) { return set_.add(name, Tensor<T>(1, c, 1, 1)); }
  int ones(const std::string& name, int c) { return set_.add(name, Tensor<T>(1, c, 1, 1, T(1))); }

 private:
  ParameterSet<T>& set_;
  Rng rng_;
};

}  // namespace

template <class T>
void UNet<T>::build_layout(ParameterSet<T>* target, std::uint64_t seed) {
  LayoutBuilder<T> b(*target, derive_seed(seed, kStreamInit));
  const auto& cfg = config_;
  auto conv = [&](const std::string& name, int cout, int cin, int k, bool zero = false) {
    Conv c;
    c.w = b.kernel(name + ".weight", cout, cin, k, zero);
    c.b = b.bias(name + ".bias", cout);
    return c;
  };
  auto norm = [&](const std::string& name, int c) {
    Norm n;
    n.g = b.ones(name + ".gamma", c);
    n.b = b.bias(name + ".beta", c);
    return n;
  };
  auto res = [&](const std::string& name, int cin, int cout) {
    ResBlock r;
    r.n1 = norm(name + ".norm1", cin);
    r.c1 = conv(name + ".conv1", cout, cin, 3);
    r.temb_w = b.kernel(name + ".temb.weight", cout, cfg.time_dim, 1, false);
    r.temb_b = b.bias(name + ".temb.bias", cout);
    r.n2 = norm(name + ".norm2", cout);
    r.c2 = conv(name + ".conv2", cout, cout, 3, /*zero=*/true);
    if (cin != cout) {
      Conv s = conv(name + ".skip", cout, cin, 1);
      r.skip_w = s.w;
      r.skip_b = s.b;
    }
    return r;
  };
  auto attn = [&](const std::string& name, int c) {
    AttnBlock a;
    a.n = norm(name + ".norm", c);
    a.q = conv(name + ".q", c, c, 1);
    a.k = conv(name + ".k", c, c, 1);
    a.v = conv(name + ".v", c, c, 1);
    a.proj = conv(name + ".proj", c, c, 1, /*zero=*/true);
    return a;
  };

  const int L = cfg.levels();
  const int base = cfg.base_channels;
  cond_ = conv("cond", 3, cfg.sar_channels, 1);
  temb1_w_ = b.kernel("time.fc1.weight", cfg.time_dim, cfg.time_dim, 1, false);
  temb1_b_ = b.bias("time.fc1.bias", cfg.time_dim);
  temb2_w_ = b.kernel("time.fc2.weight", cfg.time_dim, cfg.time_dim, 1, false);
  temb2_b_ = b.bias("time.fc2.bias", cfg.time_dim);
  conv_in_ = conv("conv_in", base, cfg.out_channels + 3, 3);

  levels_.assign(static_cast<std::size_t>(L), Level{});
  std::vector<int> skip_ch{base};
  int ch = base;
  for (int l = 0; l < L; ++l) {
    const int out = base * cfg.channel_mults[l];
    const std::string p = "down." + std::to_string(l);
    for (int i = 0; i < cfg.num_res_blocks; ++i) {
      levels_[l].down_res.push_back(res(p + ".res." + std::to_string(i), ch, out));
      ch = out;
      if (cfg.attention && l == L - 1)
        levels_[l].down_attn.push_back(attn(p + ".attn." + std::to_string(i), ch));
      skip_ch.push_back(ch);
    }
    if (l + 1 < L) {
      Conv d = conv(p + ".downsample", ch, ch, 3);
      levels_[l].down_w = d.w;
      levels_[l].down_b = d.b;
      skip_ch.push_back(ch);
    }
  }
  mid1_ = res("mid.res.0", ch, ch);
  if (cfg.attention) mid_attn_ = attn("mid.attn", ch);
  mid2_ = res("mid.res.1", ch, ch);
  for (int l = L - 1; l >= 0; --l) {
    const int out = base * cfg.channel_mults[l];
    const std::string p = "up." + std::to_string(l);
    for (int i = 0; i <= cfg.num_res_blocks; ++i) {
      const int skip = skip_ch.back();
      skip_ch.pop_back();
      levels_[l].up_res.push_back(res(p + ".res." + std::to_string(i), ch + skip, out));
      ch = out;
      if (cfg.attention && l == L - 1)
        levels_[l].up_attn.push_back(attn(p + ".attn." + std::to_string(i), ch));
    }
    if (l > 0) {
      Conv u = conv(p + ".upsample", ch, ch, 3);
      levels_[l].up_w = u.w;
      levels_[l].up_b = u.b;
    }
  }
  norm_out_ = norm("out.norm", ch);
  conv_out_ = conv("out.conv", cfg.out_channels, ch, 3);
}

template <class T>
UNet<T>::UNet(UNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  build_layout(&params_, seed);
}

template <class T>
UNet<T>::UNet(UNetConfig config, ParameterSet<T> params) : config_(std::move(config)) {
  config_.validate();
  build_layout(&params_, 0);
  if (params.size() != params_.size())
    throw FormatError("parameter count " + std::to_string(params.size()) + " does not match " +
                      std::to_string(params_.size()) + " required by the model config");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params.name(i) != params_.name(i) || !params[i].same_shape(params_[i]))
      throw FormatError("parameter " + params.name(i) + " does not match layout entry " +
                        params_.name(i) + " " + params_[i].shape_string());
  }
  params_ = std::move(params);
}

template <class T>
std::vector<typename Tape<T>::Var> UNet<T>::bind(Tape<T>& tape) const {
  std::vector<typename Tape<T>::Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_.tensors()) vars.push_back(tape.leaf(p));
  return vars;
}

template <class T>
void UNet<T>::check_inputs(const Tensor<T>& xt, const Tensor<T>& cond) const {
  if (xt.c() != config_.out_channels)
    throw ShapeError("noisy input must have " + std::to_string(config_.out_channels) +
                     " channels, got " + std::to_string(xt.c()));
  if (cond.c() != config_.sar_channels)
    throw ShapeError("SAR condition must have " + std::to_string(config_.sar_channels) +
                     " channels, got " + std::to_string(cond.c()));
  if (cond.n() != xt.n() || cond.h() != xt.h() || cond.w() != xt.w())
    throw ShapeError("SAR condition " + cond.shape_string() + " does not match noisy input " +
                     xt.shape_string());
  const int m = config_.spatial_multiple();
  if (xt.h() % m != 0 || xt.w() % m != 0 || xt.h() == 0 || xt.w() == 0)
    throw ShapeError("spatial size " + std::to_string(xt.h()) + "x" + std::to_string(xt.w()) +
                     " must be divisible by " + std::to_string(m) + " (2^(levels-1))");
}

template <class T>
typename Tape<T>::Var UNet<T>::record(Tape<T>& tape,
                                      std::span<const typename Tape<T>::Var> p,
                                      typename Tape<T>::Var xt, std::span<const int> t,
                                      typename Tape<T>::Var cond) const {
  using Var = typename Tape<T>::Var;
  check_inputs(tape.value(xt), tape.value(cond));
  const int N = tape.value(xt).n();
  if (static_cast<int>(t.size()) != N) throw ShapeError("one step index per sample required");
  const int groups = config_.norm_groups;

  Tensor<T> sinus(N, config_.time_dim, 1, 1);
  for (int n = 0; n < N; ++n) {
    const auto e = time_embedding(t[n], config_.time_dim);
    for (int i = 0; i < config_.time_dim; ++i) sinus.at(n, i, 0, 0) = static_cast<T>(e[i]);
  }
  Var temb = tape.linear(tape.constant(std::move(sinus)), p[temb1_w_], p[temb1_b_]);
  temb = tape.linear(tape.silu(temb), p[temb2_w_], p[temb2_b_]);
  const Var temb_act = tape.silu(temb);

  auto conv = [&](Var x, const Conv& c, int stride = 1) {
    return tape.conv2d(x, p[c.w], p[c.b], stride);
  };
  auto norm_act = [&](Var x, const Norm& n) {
    return tape.silu(tape.group_norm(x, p[n.g], p[n.b], groups));
  };
  auto res = [&](Var x, const ResBlock& r) {
    Var h = conv(norm_act(x, r.n1), r.c1);
    h = tape.add_channel_bias(h, tape.linear(temb_act, p[r.temb_w], p[r.temb_b]));
    h = conv(norm_act(h, r.n2), r.c2);
    const Var skip = r.skip_w >= 0 ? tape.conv2d(x, p[r.skip_w], p[r.skip_b]) : x;
    return tape.add(skip, h);
  };
  auto attn = [&](Var x, const AttnBlock& a) {
    const Var h = tape.group_norm(x, p[a.n.g], p[a.n.b], groups);
    const Var o = tape.attention(conv(h, a.q), conv(h, a.k), conv(h, a.v));
    return tape.add(x, conv(o, a.proj));
  };

  const Var fm = conv(cond, cond_);
  Var h = conv(tape.concat_channels(xt, fm), conv_in_);
  std::vector<Var> skips{h};
  const int L = config_.levels();
  for (int l = 0; l < L; ++l) {
    const Level& lv = levels_[l];
    for (std::size_t i = 0; i < lv.down_res.size(); ++i) {
      h = res(h, lv.down_res[i]);
      if (!lv.down_attn.empty()) h = attn(h, lv.down_attn[i]);
      skips.push_back(h);
    }
    if (lv.down_w >= 0) {
      h = tape.conv2d(h, p[lv.down_w], p[lv.down_b], 2);
      skips.push_back(h);
    }
  }
  h = res(h, mid1_);
  if (config_.attention) h = attn(h, mid_attn_);
  h = res(h, mid2_);
  for (int l = L - 1; l >= 0; --l) {
    const Level& lv = levels_[l];
    for (std::size_t i = 0; i < lv.up_res.size(); ++i) {
      h = res(tape.concat_channels(h, skips.back()), lv.up_res[i]);
      skips.pop_back();
      if (!lv.up_attn.empty()) h = attn(h, lv.up_attn[i]);
    }
    if (lv.up_w >= 0) h = tape.conv2d(tape.upsample_nearest2x(h), p[lv.up_w], p[lv.up_b]);
  }
  return conv(norm_act(h, norm_out_), conv_out_);
}

template <class T>
Tensor<T> UNet<T>::forward(const Tensor<T>& xt, std::span<const int> t,
                           const Tensor<T>& cond) const {
  Tape<T> tape(/*record=*/false);
  std::vector<typename Tape<T>::Var> vars;
  vars.reserve(params_.size());
  for (const auto& prm : params_.tensors()) vars.push_back(tape.constant(prm));
  const auto x = tape.constant(xt);
  const auto c = tape.constant(cond);
  const auto out = record(tape, vars, x, t, c);
  return tape.value(out);
}

template <class T>
ConditionEmbedder UNet<T>::condition_embedder() const {
  return ConditionEmbedder{params_[cond_.w].template cast<float>(),
                           params_[cond_.b].template cast<float>()};
}

template class UNet<float>;
template class UNet<double>;

}  // namespace sardiff
