// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "autograd.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace sardiff {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

struct ConvGeom {
  int cin, h, w, k, stride, pad, oh, ow;
  int rows() const { return cin * k * k; }
  int cols() const { return oh * ow; }
};

// Output rows [oy0, oy1) of the column matrix; row stride (oy1 - oy0) * ow.
template <class T>
void im2col(const T* x, const ConvGeom& g, int oy0, int oy1, T* col) {
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  const std::size_t stride = static_cast<std::size_t>(oy1 - oy0) * g.ow;
  for (int ci = 0; ci < g.cin; ++ci) {
    const T* xc = x + ci * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        T* row = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * stride;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy - oy0) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.ow, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * g.w;
          if (g.stride == 1) {
            // Valid ox range: 0 <= ox - pad + kx < w.
            const int lo = std::max(0, g.pad - kx);
            const int hi = std::min(g.ow, g.w + g.pad - kx);
            std::fill_n(dst, lo, T(0));
            if (hi > lo) std::copy(src + lo - g.pad + kx, src + hi - g.pad + kx, dst + lo);
            std::fill(dst + std::max(lo, hi), dst + g.ow, T(0));
          } else {
            for (int ox = 0; ox < g.ow; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeom& g, T* dx) {
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  for (int ci = 0; ci < g.cin; ++ci) {
    T* xc = dx + ci * plane;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const T* row = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * g.ow;
          T* dst = xc + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Output rows per im2col chunk, sized so the column buffer stays cache-resident.
int chunk_rows(const ConvGeom& g) {
  constexpr std::size_t kTargetElems = std::size_t{1} << 16;
  const std::size_t per_row = static_cast<std::size_t>(g.rows()) * g.ow;
  return std::clamp(static_cast<int>(kTargetElems / std::max<std::size_t>(per_row, 1)), 1, g.oh);
}

}  // namespace

template <class T>
typename Tape<T>::Var Tape<T>::push(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

template <class T>
typename Tape<T>::Var Tape<T>::push_op(Tensor<T> value, std::initializer_list<Var> inputs,
                                       std::function<void(Var)> backward) {
  Node node;
  node.value = std::move(value);
  for (Var in : inputs) node.requires_grad = node.requires_grad || needs(in);
  node.requires_grad = node.requires_grad && record_;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return static_cast<Var>(nodes_.size() - 1);
}

template <class T>
Tensor<T>& Tape<T>::grad(Var v) {
  Node& node = nodes_[v];
  if (node.grad.empty() && !node.value.empty()) {
    const auto& s = node.value.shape();
    node.grad = Tensor<T>(s[0], s[1], s[2], s[3]);
  }
  return node.grad;
}

template <class T>
Tensor<T> Tape<T>::take_grad(Var v) {
  Tensor<T> g = std::move(grad(v));
  nodes_[v].grad = Tensor<T>();
  return g;
}

template <class T>
void Tape<T>::backward(Var out) {
  if (!nodes_[out].requires_grad) return;
  if (nodes_[out].value.size() != 1) throw ShapeError("backward: output must be a scalar");
  grad(out)[0] = T(1);
  for (Var i = out; i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.is_leaf) continue;
    if (node.backward && !node.grad.empty()) node.backward(i);
    node.backward = nullptr;
    node.grad = Tensor<T>();
    node.value = Tensor<T>();
  }
}

template <class T>
typename Tape<T>::Var Tape<T>::conv2d(Var x, Var weight, Var bias, int stride) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& wv = value(weight);
  const int k = wv.h();
  if (wv.w() != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square and odd");
  if (wv.c() != xv.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(xv.c()) + " channels, kernel expects " +
                     std::to_string(wv.c()));
  }
  if (stride < 1) throw ParameterError("conv2d: stride must be >= 1");
  const int cout = wv.n();
  ConvGeom g{xv.c(), xv.h(), xv.w(), k, stride, k / 2, 0, 0};
  g.oh = (g.h + 2 * g.pad - k) / stride + 1;
  g.ow = (g.w + 2 * g.pad - k) / stride + 1;
  const bool direct = k == 1 && stride == 1;
  const int chunk = chunk_rows(g);

  Tensor<T> out(xv.n(), cout, g.oh, g.ow);
  CMapR<T> W(wv.data(), cout, g.rows());
  std::vector<T> col(direct ? 0 : static_cast<std::size_t>(g.rows()) * chunk * g.ow);
  for (int n = 0; n < xv.n(); ++n) {
    MapR<T> Y(out.sample(n), cout, g.cols());
    if (direct) {
      Y.noalias() = W * CMapR<T>(xv.sample(n), g.rows(), g.cols());
    } else {
      for (int oy0 = 0; oy0 < g.oh; oy0 += chunk) {
        const int oy1 = std::min(g.oh, oy0 + chunk);
        const int cols = (oy1 - oy0) * g.ow;
        im2col(xv.sample(n), g, oy0, oy1, col.data());
        Y.middleCols(oy0 * g.ow, cols).noalias() = W * CMapR<T>(col.data(), g.rows(), cols);
      }
    }
    if (bias != kNone) {
      const T* b = value(bias).data();
      for (int co = 0; co < cout; ++co) Y.row(co).array() += b[co];
    }
  }

  return push_op(std::move(out), {x, weight, bias}, [this, x, weight, bias, g, direct,
                                                     chunk](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(weight);
    const int cout = wv.n();
    const int k = g.k;
    CMapR<T> W(wv.data(), cout, g.rows());
    const bool need_x = needs(x), need_w = needs(weight), need_b = needs(bias);

    // For stride 1 the input gradient is a convolution of gy with the
    // flipped, transposed kernel.
    const bool transposed = need_x && !direct && g.stride == 1;
    ConvGeom gt{cout, g.oh, g.ow, k, 1, g.pad, g.h, g.w};
    MatR<T> wflip;
    if (transposed) {
      wflip.resize(g.cin, cout * k * k);
      for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < g.cin; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              wflip(ci, (co * k + ky) * k + kx) = wv.at(co, ci, k - 1 - ky, k - 1 - kx);
    }
    const int tchunk = transposed ? chunk_rows(gt) : 0;
    std::vector<T> col(direct ? 0 : static_cast<std::size_t>(g.rows()) * chunk * g.ow);
    std::vector<T> tcol(static_cast<std::size_t>(gt.rows()) * tchunk * gt.ow);
    std::vector<T> dcol(need_x && !direct && !transposed
                            ? static_cast<std::size_t>(g.rows()) * g.cols()
                            : 0);

    for (int n = 0; n < xv.n(); ++n) {
      CMapR<T> GY(gy.sample(n), cout, g.cols());
      if (need_w) {
        MapR<T> GW(grad(weight).data(), cout, g.rows());
        if (direct) {
          GW.noalias() += GY * CMapR<T>(xv.sample(n), g.rows(), g.cols()).transpose();
        } else {
          for (int oy0 = 0; oy0 < g.oh; oy0 += chunk) {
            const int oy1 = std::min(g.oh, oy0 + chunk);
            const int cols = (oy1 - oy0) * g.ow;
            im2col(xv.sample(n), g, oy0, oy1, col.data());
            GW.noalias() +=
                GY.middleCols(oy0 * g.ow, cols) * CMapR<T>(col.data(), g.rows(), cols).transpose();
          }
        }
      }
      if (need_b) {
        T* gb = grad(bias).data();
        for (int co = 0; co < cout; ++co) {
          const T* row = gy.channel(n, co);
          T s = T(0);
          for (int i = 0; i < g.cols(); ++i) s += row[i];
          gb[co] += s;
        }
      }
      if (!need_x) continue;
      MapR<T> GX(grad(x).sample(n), g.cin, g.h * g.w);
      if (direct) {
        GX.noalias() += W.transpose() * GY;
      } else if (transposed) {
        for (int y0 = 0; y0 < gt.oh; y0 += tchunk) {
          const int y1 = std::min(gt.oh, y0 + tchunk);
          const int cols = (y1 - y0) * gt.ow;
          im2col(gy.sample(n), gt, y0, y1, tcol.data());
          GX.middleCols(y0 * gt.ow, cols).noalias() +=
              wflip * CMapR<T>(tcol.data(), gt.rows(), cols);
        }
      } else {
        MapR<T>(dcol.data(), g.rows(), g.cols()).noalias() = W.transpose() * GY;
        col2im_add(dcol.data(), g, grad(x).sample(n));
      }
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::group_norm(Var x, Var gamma, Var beta, int groups, double eps) {
  const Tensor<T>& xv = value(x);
  const int C = xv.c();
  if (groups < 1 || C % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(C) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  const int cpg = C / groups;
  const auto plane = static_cast<Eigen::Index>(xv.plane());
  const double len = static_cast<double>(cpg) * plane;
  std::vector<T> mean(static_cast<std::size_t>(xv.n()) * groups);
  std::vector<T> rstd(mean.size());
  Tensor<T> out(xv.n(), C, xv.h(), xv.w());
  const T* ga = value(gamma).data();
  const T* be = value(beta).data();
  for (int n = 0; n < xv.n(); ++n) {
    for (int gi = 0; gi < groups; ++gi) {
      const T* X = xv.channel(n, gi * cpg);
      const Eigen::Index count = cpg * plane;
      double m = 0.0;
      for (Eigen::Index i = 0; i < count; ++i) m += X[i];
      m /= len;
      double var = 0.0;
      for (Eigen::Index i = 0; i < count; ++i) var += (X[i] - m) * (X[i] - m);
      var /= len;
      const double r = 1.0 / std::sqrt(var + eps);
      mean[n * groups + gi] = static_cast<T>(m);
      rstd[n * groups + gi] = static_cast<T>(r);
      for (int cc = 0; cc < cpg; ++cc) {
        const int c = gi * cpg + cc;
        const T scale = static_cast<T>(r) * ga[c];
        const T shift = be[c] - static_cast<T>(m * r) * ga[c];
        const T* src = xv.channel(n, c);
        T* dst = out.channel(n, c);
        for (Eigen::Index i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
      }
    }
  }

  return push_op(std::move(out), {x, gamma, beta},
                 [this, x, gamma, beta, groups, cpg, mean = std::move(mean),
                  rstd = std::move(rstd)](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    const Tensor<T>& xv = value(x);
    const T* ga = value(gamma).data();
    const auto plane = static_cast<Eigen::Index>(xv.plane());
    const double len = static_cast<double>(cpg) * plane;
    std::vector<double> dgamma(static_cast<std::size_t>(cpg)), dbeta(dgamma.size());
    for (int n = 0; n < xv.n(); ++n) {
      for (int gi = 0; gi < groups; ++gi) {
        const T m = mean[n * groups + gi];
        const T r = rstd[n * groups + gi];
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int cc = 0; cc < cpg; ++cc) {
          const int c = gi * cpg + cc;
          const T* X = xv.channel(n, c);
          const T* GY = gy.channel(n, c);
          double sg = 0.0, sgx = 0.0;
          for (Eigen::Index i = 0; i < plane; ++i) {
            sg += GY[i];
            sgx += static_cast<double>(GY[i]) * (X[i] - m);
          }
          dgamma[cc] = sgx * r;
          dbeta[cc] = sg;
          if (needs(gamma)) grad(gamma)[c] += static_cast<T>(dgamma[cc]);
          if (needs(beta)) grad(beta)[c] += static_cast<T>(dbeta[cc]);
          sum_dxhat += dbeta[cc] * ga[c];
          sum_dxhat_xhat += dgamma[cc] * ga[c];
        }
        if (!needs(x)) continue;
        const auto mean_d = static_cast<T>(sum_dxhat / len);
        const auto mean_dx = static_cast<T>(sum_dxhat_xhat / len);
        for (int cc = 0; cc < cpg; ++cc) {
          const int c = gi * cpg + cc;
          const T* X = xv.channel(n, c);
          const T* GY = gy.channel(n, c);
          T* GX = grad(x).channel(n, c);
          const T rm = r * mean_dx;
          for (Eigen::Index i = 0; i < plane; ++i)
            GX[i] += r * (GY[i] * ga[c] - mean_d - (X[i] - m) * rm);
        }
      }
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::silu(Var x) {
  const Tensor<T>& xv = value(x);
  Tensor<T> out(xv.n(), xv.c(), xv.h(), xv.w());
  const std::size_t n = xv.size();
  const T* X = xv.data();
  T* Y = out.data();
  for (std::size_t i = 0; i < n; ++i) Y[i] = X[i] / (T(1) + std::exp(-X[i]));
  return push_op(std::move(out), {x}, [this, x](Var self) {
    const Tensor<T>& xv = value(x);
    const std::size_t n = xv.size();
    const T* X = xv.data();
    const T* GY = nodes_[self].grad.data();
    T* GX = grad(x).data();
    for (std::size_t i = 0; i < n; ++i) {
      const T s = T(1) / (T(1) + std::exp(-X[i]));
      GX[i] += GY[i] * s * (T(1) + X[i] * (T(1) - s));
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Tensor<T> out = value(a);
  const Tensor<T>& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push_op(std::move(out), {a, b}, [this, a, b](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    for (Var in : {a, b}) {
      if (!needs(in)) continue;
      Tensor<T>& g = grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::add_channel_bias(Var x, Var v) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& vv = value(v);
  if (vv.n() != xv.n() || vv.c() != xv.c() || vv.plane() != 1)
    throw ShapeError("add_channel_bias: " + vv.shape_string() + " does not broadcast to " +
                     xv.shape_string());
  Tensor<T> out = xv;
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c) {
      T* p = out.channel(n, c);
      const T b = vv.at(n, c, 0, 0);
      for (std::size_t i = 0; i < xv.plane(); ++i) p[i] += b;
    }
  return push_op(std::move(out), {x, v}, [this, x, v](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    if (needs(x)) {
      Tensor<T>& gx = grad(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
    }
    if (needs(v)) {
      Tensor<T>& gv = grad(v);
      for (int n = 0; n < gy.n(); ++n)
        for (int c = 0; c < gy.c(); ++c) {
          const T* p = gy.channel(n, c);
          T s = T(0);
          for (std::size_t i = 0; i < gy.plane(); ++i) s += p[i];
          gv.at(n, c, 0, 0) += s;
        }
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::linear(Var x, Var weight, Var bias) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& wv = value(weight);
  const int in = wv.c(), outd = wv.n();
  if (static_cast<int>(xv.sample_size()) != in)
    throw ShapeError("linear: input width " + std::to_string(xv.sample_size()) + " vs weight " +
                     std::to_string(in));
  Tensor<T> out(xv.n(), outd, 1, 1);
  CMapR<T> W(wv.data(), outd, in);
  CMapR<T> X(xv.data(), xv.n(), in);
  MapR<T> Y(out.data(), xv.n(), outd);
  // Row by row so a sample's result does not depend on the batch size.
  for (int n = 0; n < xv.n(); ++n) Y.row(n).noalias() = (W * X.row(n).transpose()).transpose();
  if (bias != kNone) {
    const T* b = value(bias).data();
    for (int n = 0; n < xv.n(); ++n)
      for (int o = 0; o < outd; ++o) Y(n, o) += b[o];
  }
  return push_op(std::move(out), {x, weight, bias}, [this, x, weight, bias](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    const Tensor<T>& xv = value(x);
    const Tensor<T>& wv = value(weight);
    const int in = wv.c(), outd = wv.n();
    CMapR<T> GY(gy.data(), xv.n(), outd);
    if (needs(weight)) {
      MapR<T>(grad(weight).data(), outd, in).noalias() +=
          GY.transpose() * CMapR<T>(xv.data(), xv.n(), in);
    }
    if (needs(bias)) {
      T* gb = grad(bias).data();
      for (int n = 0; n < xv.n(); ++n)
        for (int o = 0; o < outd; ++o) gb[o] += GY(n, o);
    }
    if (needs(x)) {
      MapR<T>(grad(x).data(), xv.n(), in).noalias() += GY * CMapR<T>(wv.data(), outd, in);
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::concat_channels(Var a, Var b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (av.n() != bv.n() || av.h() != bv.h() || av.w() != bv.w())
    throw ShapeError("concat_channels: " + av.shape_string() + " vs " + bv.shape_string());
  Tensor<T> out(av.n(), av.c() + bv.c(), av.h(), av.w());
  for (int n = 0; n < av.n(); ++n) {
    T* dst = std::copy_n(av.sample(n), av.sample_size(), out.sample(n));
    std::copy_n(bv.sample(n), bv.sample_size(), dst);
  }
  return push_op(std::move(out), {a, b}, [this, a, b](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    const std::size_t sa = value(a).sample_size(), sb = value(b).sample_size();
    for (int n = 0; n < gy.n(); ++n) {
      const T* src = gy.sample(n);
      if (needs(a)) {
        T* g = grad(a).sample(n);
        for (std::size_t i = 0; i < sa; ++i) g[i] += src[i];
      }
      if (needs(b)) {
        T* g = grad(b).sample(n);
        for (std::size_t i = 0; i < sb; ++i) g[i] += src[sa + i];
      }
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::upsample_nearest2x(Var x) {
  const Tensor<T>& xv = value(x);
  const int h = xv.h(), w = xv.w();
  Tensor<T> out(xv.n(), xv.c(), 2 * h, 2 * w);
  for (int n = 0; n < xv.n(); ++n)
    for (int c = 0; c < xv.c(); ++c) {
      const T* s = xv.channel(n, c);
      T* d = out.channel(n, c);
      for (int y = 0; y < 2 * h; ++y)
        for (int xx = 0; xx < 2 * w; ++xx) d[y * 2 * w + xx] = s[(y / 2) * w + xx / 2];
    }
  return push_op(std::move(out), {x}, [this, x](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    Tensor<T>& gx = grad(x);
    const int h = gx.h(), w = gx.w();
    for (int n = 0; n < gx.n(); ++n)
      for (int c = 0; c < gx.c(); ++c) {
        const T* s = gy.channel(n, c);
        T* d = gx.channel(n, c);
        for (int y = 0; y < 2 * h; ++y)
          for (int xx = 0; xx < 2 * w; ++xx) d[(y / 2) * w + xx / 2] += s[y * 2 * w + xx];
      }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::attention(Var q, Var k, Var v) {
  const Tensor<T>& qv = value(q);
  require_same_shape(qv, value(k), "attention");
  require_same_shape(qv, value(v), "attention");
  const int C = qv.c();
  const int L = static_cast<int>(qv.plane());
  const T scale = T(1) / std::sqrt(static_cast<T>(C));
  Tensor<T> out(qv.n(), C, qv.h(), qv.w());
  std::vector<MatR<T>> probs(static_cast<std::size_t>(qv.n()));
  for (int n = 0; n < qv.n(); ++n) {
    CMapR<T> Q(qv.sample(n), C, L), K(value(k).sample(n), C, L), V(value(v).sample(n), C, L);
    MatR<T> S = (Q.transpose() * K) * scale;  // (L, L), row i = query i
    for (int i = 0; i < L; ++i) {
      const T mx = S.row(i).maxCoeff();
      S.row(i) = (S.row(i).array() - mx).exp();
      S.row(i) /= S.row(i).sum();
    }
    MapR<T>(out.sample(n), C, L).noalias() = V * S.transpose();
    probs[n] = std::move(S);
  }
  return push_op(std::move(out), {q, k, v},
                 [this, q, k, v, C, L, scale, probs = std::move(probs)](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    for (int n = 0; n < gy.n(); ++n) {
      const MatR<T>& P = probs[n];
      CMapR<T> GO(gy.sample(n), C, L);
      CMapR<T> Q(value(q).sample(n), C, L), K(value(k).sample(n), C, L),
          V(value(v).sample(n), C, L);
      if (needs(v)) MapR<T>(grad(v).sample(n), C, L).noalias() += GO * P;
      MatR<T> dP = GO.transpose() * V;
      MatR<T> dS(L, L);
      for (int i = 0; i < L; ++i) {
        const T dot = (dP.row(i).array() * P.row(i).array()).sum();
        dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
      }
      if (needs(q)) MapR<T>(grad(q).sample(n), C, L).noalias() += scale * (K * dS.transpose());
      if (needs(k)) MapR<T>(grad(k).sample(n), C, L).noalias() += scale * (Q * dS);
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::affine_per_sample(Var x, std::vector<T> scale,
                                                 const Tensor<T>& offset) {
  const Tensor<T>& xv = value(x);
  require_same_shape(xv, offset, "affine_per_sample");
  if (static_cast<int>(scale.size()) != xv.n()) throw ShapeError("affine_per_sample: scale size");
  Tensor<T> out(xv.n(), xv.c(), xv.h(), xv.w());
  for (int n = 0; n < xv.n(); ++n) {
    const T* s = xv.sample(n);
    const T* o = offset.sample(n);
    T* d = out.sample(n);
    for (std::size_t i = 0; i < xv.sample_size(); ++i) d[i] = scale[n] * s[i] + o[i];
  }
  return push_op(std::move(out), {x}, [this, x, scale = std::move(scale)](Var self) {
    const Tensor<T>& gy = nodes_[self].grad;
    Tensor<T>& gx = grad(x);
    for (int n = 0; n < gy.n(); ++n) {
      const T* s = gy.sample(n);
      T* d = gx.sample(n);
      for (std::size_t i = 0; i < gy.sample_size(); ++i) d[i] += scale[n] * s[i];
    }
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::blur(Var x, const BlurSpec& spec) {
  Tensor<T> out = gaussian_blur(value(x), spec);
  return push_op(std::move(out), {x}, [this, x, spec](Var self) {
    Tensor<T> g = gaussian_blur_adjoint(nodes_[self].grad, spec);
    Tensor<T>& gx = grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::mse(Var x, const Tensor<T>& target) {
  const Tensor<T>& xv = value(x);
  require_same_shape(xv, target, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = static_cast<double>(xv[i]) - target[i];
    s += d * d;
  }
  Tensor<T> out(1, 1, 1, 1, static_cast<T>(s / static_cast<double>(xv.size())));
  return push_op(std::move(out), {x}, [this, x, target](Var self) {
    const T g = nodes_[self].grad[0];
    const Tensor<T>& xv = value(x);
    Tensor<T>& gx = grad(x);
    const T k = T(2) * g / static_cast<T>(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += k * (xv[i] - target[i]);
  });
}

template <class T>
typename Tape<T>::Var Tape<T>::weighted_sum(Var a, Var b, T weight) {
  Tensor<T> out(1, 1, 1, 1, value(a)[0] + weight * value(b)[0]);
  return push_op(std::move(out), {a, b}, [this, a, b, weight](Var self) {
    const T g = nodes_[self].grad[0];
    if (needs(a)) grad(a)[0] += g;
    if (needs(b)) grad(b)[0] += weight * g;
  });
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sardiff
