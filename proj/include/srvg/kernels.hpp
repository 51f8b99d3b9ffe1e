// Copyright 2026 The srvg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Differentiable kernels: cross-correlation conv, its adjoint (transposed
// conv), dense layers and elementwise activations. Every kernel assigns a
// whole output plane to one worker and keeps a fixed accumulation order
// inside it, so thread count never changes a single output bit.

#ifndef SRVG_KERNELS_HPP
#define SRVG_KERNELS_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include "srvg/common.hpp"
#include "srvg/tensor.hpp"

namespace srvg {

enum class LayerKind { Conv, TransposedConv, Dense };

enum class Act { None, Elu, Relu, LeakyRelu, Tanh, Sigmoid };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::None: return "none";
    case Act::Elu: return "elu";
    case Act::Relu: return "relu";
    case Act::LeakyRelu: return "leaky-relu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
  }
  return "?";
}

constexpr float kLeakySlope = 0.2f;

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int in_channels = 0;
  int out_channels = 0;
  int kh = 1, kw = 1;
  int stride = 1;
  int ph = 0, pw = 0;
  int oph = 0, opw = 0;  // transposed conv output padding
  Act act = Act::None;
  int units = 0;                         // dense output width
  std::array<int, 3> reshape{0, 0, 0};   // optional (c,h,w) view applied after a dense layer

  void validate() const {
    if (kind == LayerKind::Dense) {
      if (units < 1) throw ShapeError("dense layer needs units >= 1");
      return;
    }
    if (in_channels < 1 || out_channels < 1) throw ShapeError("layer needs positive channel counts");
    if (kh < 1 || kw < 1) throw ShapeError("kernel extents must be >= 1");
    if (stride < 1) throw ShapeError("stride must be >= 1");
    if (ph < 0 || pw < 0 || oph < 0 || opw < 0) throw ShapeError("padding must be non-negative");
    if (kind == LayerKind::TransposedConv && (oph >= stride || opw >= stride))
      throw ShapeError("transposed conv output padding must be < stride");
  }
};

inline LayerSpec conv_spec(int in_ch, int out_ch, int k, int stride, int pad, Act act) {
  LayerSpec s;
  s.kind = LayerKind::Conv;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kh = s.kw = k;
  s.stride = stride;
  s.ph = s.pw = pad;
  s.act = act;
  return s;
}

inline LayerSpec tconv_spec(int in_ch, int out_ch, int k, int stride, int pad, int out_pad, Act act) {
  LayerSpec s = conv_spec(in_ch, out_ch, k, stride, pad, act);
  s.kind = LayerKind::TransposedConv;
  s.oph = s.opw = out_pad;
  return s;
}

inline LayerSpec dense_spec(int units, Act act) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.units = units;
  s.act = act;
  return s;
}

inline int conv_out_extent(int in, int pad, int k, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int tconv_out_extent(int in, int pad, int k, int stride, int out_pad) {
  return (in - 1) * stride - 2 * pad + k + out_pad;
}

namespace detail {

// First output index whose receptive field starts at or past zero:
// smallest o >= 0 with o*stride - pad + k >= 0.
inline int first_valid(int pad, int k, int stride) {
  const int num = pad - k;
  return num <= 0 ? 0 : (num + stride - 1) / stride;
}

// One past the last output index staying inside `extent`.
inline int last_valid(int extent, int pad, int k, int stride, int limit) {
  const int num = extent - 1 - k + pad;
  if (num < 0) return 0;
  return std::min(limit, num / stride + 1);
}

template <typename T>
void check_conv_args(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& b,
                     const LayerSpec& spec, bool transposed) {
  spec.validate();
  if (x.n() < 1 || x.c() < 1 || x.h() < 1 || x.w() < 1)
    throw ShapeError("zero-extent input " + x.shape_str());
  if (x.c() != spec.in_channels)
    throw ShapeError("input channels " + std::to_string(x.c()) + " != spec in_channels " +
                     std::to_string(spec.in_channels));
  // conv weights are (out,in,kh,kw); transposed conv weights are (in,out,kh,kw)
  const int d0 = transposed ? spec.in_channels : spec.out_channels;
  const int d1 = transposed ? spec.out_channels : spec.in_channels;
  if (w.shape != std::array<int, 4>{d0, d1, spec.kh, spec.kw})
    throw ShapeError("weight shape " + w.shape_str() + " does not match layer spec");
  if (static_cast<int>(b.size()) != spec.out_channels)
    throw ShapeError("bias length " + std::to_string(b.size()) + " != out_channels");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (cross-correlation), weights (out_ch, in_ch, kh, kw).

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& b,
                  const LayerSpec& spec) {
  detail::check_conv_args(x, w, b, spec, false);
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, S = spec.stride;
  const int OH = conv_out_extent(H, spec.ph, KH, S);
  const int OW = conv_out_extent(W, spec.pw, KW, S);
  if (OH < 1 || OW < 1)
    throw ShapeError("conv output would be empty for input " + x.shape_str());

  TensorT<T> y(N, OC, OH, OW);
  // one thread owns one (n, oc) output plane; within a plane the
  // accumulation order over (ic, ki, kj) is fixed, so results are
  // bit-identical for every thread count
  parallel_for(static_cast<std::int64_t>(N) * OC, [&](std::int64_t job) {
    const int n = static_cast<int>(job / OC);
    const int oc = static_cast<int>(job % OC);
    T* plane = &y.data[static_cast<std::size_t>(y.index(n, oc, 0, 0))];
    std::fill(plane, plane + static_cast<std::size_t>(OH) * OW, b[static_cast<std::size_t>(oc)]);
    for (int ic = 0; ic < C; ++ic) {
      for (int ki = 0; ki < KH; ++ki) {
        const int oh0 = detail::first_valid(spec.ph, ki, S);
        const int oh1 = detail::last_valid(H, spec.ph, ki, S, OH);
        for (int kj = 0; kj < KW; ++kj) {
          const int ow0 = detail::first_valid(spec.pw, kj, S);
          const int ow1 = detail::last_valid(W, spec.pw, kj, S, OW);
          const T wv = w.at(oc, ic, ki, kj);
          const int off = kj - spec.pw;
          for (int oh = oh0; oh < oh1; ++oh) {
            const int ih = oh * S - spec.ph + ki;
            const T* __restrict xrow = &x.data[static_cast<std::size_t>(x.index(n, ic, ih, 0))];
            T* __restrict yrow = plane + static_cast<std::size_t>(oh) * OW;
            if (S == 1) {
              for (int ow = ow0; ow < ow1; ++ow) yrow[ow] += wv * xrow[ow + off];
            } else {
              for (int ow = ow0; ow < ow1; ++ow) yrow[ow] += wv * xrow[ow * S + off];
            }
          }
        }
      }
    }
  });
  return y;
}

namespace detail {

template <typename T>
void reduce_bias_grad(const TensorT<T>& dy, std::vector<T>* db) {
  const int OC = dy.c();
  db->assign(static_cast<std::size_t>(OC), T(0));
  const std::int64_t plane = static_cast<std::int64_t>(dy.h()) * dy.w();
  for (int n = 0; n < dy.n(); ++n)
    for (int oc = 0; oc < OC; ++oc) {
      const T* row = &dy.data[static_cast<std::size_t>(dy.index(n, oc, 0, 0))];
      T acc = T(0);
      for (std::int64_t i = 0; i < plane; ++i) acc += row[i];
      (*db)[static_cast<std::size_t>(oc)] += acc;
    }
}

}  // namespace detail

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& b,
                             const LayerSpec& spec);

// Gradients w.r.t. input, weights and bias. Null outputs are skipped.
template <typename T>
void conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const LayerSpec& spec,
                     const TensorT<T>& dy, TensorT<T>* dx, TensorT<T>* dw, std::vector<T>* db) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, S = spec.stride;
  const int OH = dy.h(), OW = dy.w();

  if (dx != nullptr) {
    // the input gradient of a conv is exactly the adjoint scatter, i.e. a
    // transposed conv of dy with the same weight bytes; output padding
    // restores the stored input extent (always < stride by construction)
    LayerSpec adj = spec;
    adj.kind = LayerKind::TransposedConv;
    adj.in_channels = OC;
    adj.out_channels = C;
    adj.oph = H - tconv_out_extent(OH, spec.ph, KH, S, 0);
    adj.opw = W - tconv_out_extent(OW, spec.pw, KW, S, 0);
    *dx = transposed_conv2d(dy, w, std::vector<T>(static_cast<std::size_t>(C), T(0)), adj);
  }

  if (dw != nullptr) {
    if (KH * KW > 64) throw ShapeError("conv kernel larger than 8x8 not supported");
    *dw = TensorT<T>(OC, C, KH, KW);
    parallel_for(static_cast<std::int64_t>(OC) * C, [&](std::int64_t job) {
      const int oc = static_cast<int>(job / C);
      const int ic = static_cast<int>(job % C);
      T acc[64] = {};
      for (int ki = 0; ki < KH; ++ki) {
        const int oh0 = detail::first_valid(spec.ph, ki, S);
        const int oh1 = detail::last_valid(H, spec.ph, ki, S, OH);
        for (int n = 0; n < N; ++n) {
          for (int oh = oh0; oh < oh1; ++oh) {
            const int ih = oh * S - spec.ph + ki;
            const T* __restrict dyrow = &dy.data[static_cast<std::size_t>(dy.index(n, oc, oh, 0))];
            const T* __restrict xrow = &x.data[static_cast<std::size_t>(x.index(n, ic, ih, 0))];
            for (int kj = 0; kj < KW; ++kj) {
              const int ow0 = detail::first_valid(spec.pw, kj, S);
              const int ow1 = detail::last_valid(W, spec.pw, kj, S, OW);
              const int off = kj - spec.pw;
              T a = T(0);
              if (S == 1) {
                for (int ow = ow0; ow < ow1; ++ow) a += dyrow[ow] * xrow[ow + off];
              } else {
                for (int ow = ow0; ow < ow1; ++ow) a += dyrow[ow] * xrow[ow * S + off];
              }
              acc[ki * KW + kj] += a;
            }
          }
        }
      }
      for (int k = 0; k < KH * KW; ++k)
        dw->data[static_cast<std::size_t>(dw->index(oc, ic, 0, 0)) + k] = acc[k];
    });
  }

  if (db != nullptr) detail::reduce_bias_grad(dy, db);
}

// ---------------------------------------------------------------------------
// Transposed convolution (the adjoint of conv2d), weights (in_ch, out_ch, kh, kw).

template <typename T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& b,
                             const LayerSpec& spec) {
  detail::check_conv_args(x, w, b, spec, true);
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, S = spec.stride;
  const int OH = tconv_out_extent(H, spec.ph, KH, S, spec.oph);
  const int OW = tconv_out_extent(W, spec.pw, KW, S, spec.opw);
  if (OH < 1 || OW < 1)
    throw ShapeError("transposed conv output would be empty for input " + x.shape_str());

  TensorT<T> y(N, OC, OH, OW);
  // per-plane scatter; threads own disjoint (n, oc) planes and the scatter
  // order within a plane is fixed, so this stays bit-reproducible
  parallel_for(static_cast<std::int64_t>(N) * OC, [&](std::int64_t job) {
    const int n = static_cast<int>(job / OC);
    const int oc = static_cast<int>(job % OC);
    T* plane = &y.data[static_cast<std::size_t>(y.index(n, oc, 0, 0))];
    std::fill(plane, plane + static_cast<std::size_t>(OH) * OW, b[static_cast<std::size_t>(oc)]);
    for (int ic = 0; ic < C; ++ic) {
      for (int ki = 0; ki < KH; ++ki) {
        const int ih0 = detail::first_valid(spec.ph, ki, S);
        const int ih1 = detail::last_valid(OH, spec.ph, ki, S, H);
        for (int kj = 0; kj < KW; ++kj) {
          const int iw0 = detail::first_valid(spec.pw, kj, S);
          const int iw1 = detail::last_valid(OW, spec.pw, kj, S, W);
          const T wv = w.at(ic, oc, ki, kj);
          const int off = kj - spec.pw;
          for (int ih = ih0; ih < ih1; ++ih) {
            const int oh = ih * S - spec.ph + ki;
            const T* __restrict xrow = &x.data[static_cast<std::size_t>(x.index(n, ic, ih, 0))];
            T* __restrict yrow = plane + static_cast<std::size_t>(oh) * OW;
            if (S == 1) {
              for (int iw = iw0; iw < iw1; ++iw) yrow[iw + off] += wv * xrow[iw];
            } else {
              for (int iw = iw0; iw < iw1; ++iw) yrow[iw * S + off] += wv * xrow[iw];
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename T>
void transposed_conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const LayerSpec& spec,
                                const TensorT<T>& dy, TensorT<T>* dx, TensorT<T>* dw,
                                std::vector<T>* db) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  const int OC = spec.out_channels, KH = spec.kh, KW = spec.kw, S = spec.stride;
  const int OH = dy.h(), OW = dy.w();

  if (dx != nullptr) {
    // d(input) of a scatter is a plain conv gather over dy with the same
    // weight bytes
    LayerSpec adj = spec;
    adj.kind = LayerKind::Conv;
    adj.in_channels = OC;
    adj.out_channels = C;
    adj.oph = adj.opw = 0;
    *dx = conv2d(dy, w, std::vector<T>(static_cast<std::size_t>(C), T(0)), adj);
    if (dx->shape != x.shape)
      throw ShapeError("transposed conv backward: input extent mismatch " + dx->shape_str() +
                       " vs " + x.shape_str());
  }

  if (dw != nullptr) {
    if (KH * KW > 64) throw ShapeError("conv kernel larger than 8x8 not supported");
    *dw = TensorT<T>(C, OC, KH, KW);
    parallel_for(static_cast<std::int64_t>(C) * OC, [&](std::int64_t job) {
      const int ic = static_cast<int>(job / OC);
      const int oc = static_cast<int>(job % OC);
      T acc[64] = {};
      for (int ki = 0; ki < KH; ++ki) {
        const int ih0 = detail::first_valid(spec.ph, ki, S);
        const int ih1 = detail::last_valid(OH, spec.ph, ki, S, H);
        for (int n = 0; n < N; ++n) {
          for (int ih = ih0; ih < ih1; ++ih) {
            const int oh = ih * S - spec.ph + ki;
            const T* __restrict xrow = &x.data[static_cast<std::size_t>(x.index(n, ic, ih, 0))];
            const T* __restrict dyrow = &dy.data[static_cast<std::size_t>(dy.index(n, oc, oh, 0))];
            for (int kj = 0; kj < KW; ++kj) {
              const int iw0 = detail::first_valid(spec.pw, kj, S);
              const int iw1 = detail::last_valid(OW, spec.pw, kj, S, W);
              const int off = kj - spec.pw;
              T a = T(0);
              if (S == 1) {
                for (int iw = iw0; iw < iw1; ++iw) a += xrow[iw] * dyrow[iw + off];
              } else {
                for (int iw = iw0; iw < iw1; ++iw) a += xrow[iw] * dyrow[iw * S + off];
              }
              acc[ki * KW + kj] += a;
            }
          }
        }
      }
      for (int k = 0; k < KH * KW; ++k)
        dw->data[static_cast<std::size_t>(dw->index(ic, oc, 0, 0)) + k] = acc[k];
    });
  }

  if (db != nullptr) detail::reduce_bias_grad(dy, db);
}

// ---------------------------------------------------------------------------
// Dense layer. The input tensor is read as (batch, in_features) with
// in_features = c*h*w; weights are (1,1,out,in); output is (batch, out, 1, 1).

template <typename T>
TensorT<T> dense(const TensorT<T>& x, const TensorT<T>& w, const std::vector<T>& b) {
  const int N = x.n();
  const std::int64_t F = static_cast<std::int64_t>(x.c()) * x.h() * x.w();
  const int out = w.h();
  if (w.n() != 1 || w.c() != 1) throw ShapeError("dense weights must be (1,1,out,in)");
  if (w.w() != F)
    throw ShapeError("dense weight columns " + std::to_string(w.w()) + " != input length " +
                     std::to_string(F));
  if (static_cast<int>(b.size()) != out) throw ShapeError("dense bias length != units");

  TensorT<T> y(N, out, 1, 1);
  parallel_for(static_cast<std::int64_t>(N) * out, [&](std::int64_t job) {
    const int n = static_cast<int>(job / out);
    const int o = static_cast<int>(job % out);
    const T* xrow = &x.data[static_cast<std::size_t>(n) * F];
    const T* wrow = &w.data[static_cast<std::size_t>(o) * F];
    T acc = b[static_cast<std::size_t>(o)];
    for (std::int64_t f = 0; f < F; ++f) acc += wrow[f] * xrow[f];
    y.data[static_cast<std::size_t>(job)] = acc;
  });
  return y;
}

template <typename T>
void dense_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                    TensorT<T>* dx, TensorT<T>* dw, std::vector<T>* db) {
  const int N = x.n();
  const std::int64_t F = static_cast<std::int64_t>(x.c()) * x.h() * x.w();
  const int out = w.h();

  if (dx != nullptr) {
    *dx = TensorT<T>(x.n(), x.c(), x.h(), x.w());
    parallel_for(N, [&](std::int64_t n) {
      T* dxrow = &dx->data[static_cast<std::size_t>(n) * F];
      const T* dyrow = &dy.data[static_cast<std::size_t>(n) * out];
      for (std::int64_t f = 0; f < F; ++f) {
        T acc = T(0);
        for (int o = 0; o < out; ++o) acc += dyrow[o] * w.data[static_cast<std::size_t>(o) * F + f];
        dxrow[f] = acc;
      }
    });
  }

  if (dw != nullptr) {
    *dw = TensorT<T>(1, 1, out, static_cast<int>(F));
    parallel_for(out, [&](std::int64_t o) {
      T* dwrow = &dw->data[static_cast<std::size_t>(o) * F];
      for (int n = 0; n < N; ++n) {
        const T g = dy.data[static_cast<std::size_t>(n) * out + o];
        const T* xrow = &x.data[static_cast<std::size_t>(n) * F];
        for (std::int64_t f = 0; f < F; ++f) dwrow[f] += g * xrow[f];
      }
    });
  }

  if (db != nullptr) {
    db->assign(static_cast<std::size_t>(out), T(0));
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < out; ++o) (*db)[static_cast<std::size_t>(o)] += dy.data[static_cast<std::size_t>(n) * out + o];
  }
}

// ---------------------------------------------------------------------------
// Activations. ELU uses alpha = 1.

template <typename T>
T activation_scalar(T x, Act act) {
  switch (act) {
    case Act::None: return x;
    case Act::Relu: return x > T(0) ? x : T(0);
    case Act::LeakyRelu: return x > T(0) ? x : T(kLeakySlope) * x;
    case Act::Elu: return x > T(0) ? x : static_cast<T>(std::exp(static_cast<double>(x)) - 1.0);
    case Act::Tanh: return static_cast<T>(std::tanh(static_cast<double>(x)));
    case Act::Sigmoid: return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
  }
  return x;
}

// Derivative expressed from the pre-activation x and post-activation y.
template <typename T>
T activation_deriv(T x, T y, Act act) {
  switch (act) {
    case Act::None: return T(1);
    case Act::Relu: return x > T(0) ? T(1) : T(0);
    case Act::LeakyRelu: return x > T(0) ? T(1) : T(kLeakySlope);
    case Act::Elu: return x > T(0) ? T(1) : y + T(1);
    case Act::Tanh: return T(1) - y * y;
    case Act::Sigmoid: return y * (T(1) - y);
  }
  return T(1);
}

template <typename T>
TensorT<T> activation(const TensorT<T>& x, Act act) {
  TensorT<T> y = x;
  y.grad.clear();
  for (T& v : y.data) v = activation_scalar(v, act);
  return y;
}

template <typename T>
TensorT<T> activation_backward(const TensorT<T>& pre, const TensorT<T>& post,
                               const TensorT<T>& dy, Act act) {
  TensorT<T> dx(pre.n(), pre.c(), pre.h(), pre.w());
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    dx.data[i] = dy.data[i] * activation_deriv(pre.data[i], post.data[i], act);
  return dx;
}

}  // namespace srvg

#endif  // SRVG_KERNELS_HPP
