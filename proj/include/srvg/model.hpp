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
// The encoder / generator / discriminator triple.
//
//   E: conv 5x5 s2 (w, 2w, 4w) + ELU, then a dense head to 256 units whose
//      halves are the latent mean and log-scale.
//   G: dense projection of the 128-dim latent to (16w, 11, 2) + ReLU, three
//      3x3 s2 transposed convs (8w, 4w, 2w) + ReLU, one 3x3 s1 transposed
//      conv (w) + ReLU, a 3x3 conv to 1 channel, Tanh, then an affine map
//      onto [0,1].
//   D: four 3x3 s1 convs (w, 2w, 4w, 8w) + LeakyReLU(0.2), an extra 3x3
//      conv to 1 channel whose flattened map is the feature vector, then
//      global mean + sigmoid for the real/fake probability.
//
// w is the channel width factor; the default of 8 gives filter counts
// (8,16,32), (64,32,16,8) and (8,16,32,64).

#ifndef SRVG_MODEL_HPP
#define SRVG_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srvg/adam.hpp"
#include "srvg/kernels.hpp"
#include "srvg/losses.hpp"
#include "srvg/pianoroll.hpp"
#include "srvg/rng.hpp"
#include "srvg/tensor.hpp"

namespace srvg {

constexpr int kLatentDim = 128;
constexpr int kFeatureLen = kBarRows * kBarCols;  // flattened discriminator feature map

struct ModelConfig {
  int width = 8;  // channel width factor
};

struct LatentParams {
  std::vector<float> mu;
  std::vector<float> log_var;
};

/// The (params, noise, z) triple of one reparameterized draw.
struct LatentSample {
  std::optional<LatentParams> params;  // absent for pure-noise draws
  std::vector<float> noise;
  std::vector<float> z;
};

struct DiscriminatorOutput {
  float prob = 0.5f;
  std::vector<float> features;
};

template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> value;  // grad buffer lives inside the tensor
  AdamStateT<T> adam;
};

template <typename T>
struct ModelStateT {
  std::vector<ParamT<T>> params;  // fixed order, unique names
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].name == name) return static_cast<int>(i);
    throw Error("unknown parameter: " + name);
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.value.numel();
    return n;
  }
};

using ModelState = ModelStateT<float>;

// A layer's parameter slots within the model state. Dense and conv layers
// each own a weight tensor and a bias vector (stored as a (1,1,1,len) tensor).
template <typename T>
struct NetT {
  std::vector<LayerSpec> layers;
  std::vector<int> weight_idx;
  std::vector<int> bias_idx;
};

template <typename T>
struct NetCacheT {
  TensorT<T> input;                // net input; layer i > 0 reads post[i-1]
  std::vector<TensorT<T>> pre;     // pre-activation outputs
  std::vector<TensorT<T>> post;    // post-activation outputs (reshaped)

  const TensorT<T>& layer_input(int li) const {
    return li == 0 ? input : post[static_cast<std::size_t>(li) - 1];
  }
};

namespace detail {

struct NamedLayer {
  std::string name;
  LayerSpec spec;
};

inline std::vector<NamedLayer> encoder_layers(int w) {
  return {
      {"e.conv1", conv_spec(1, w, 5, 2, 2, Act::Elu)},
      {"e.conv2", conv_spec(w, 2 * w, 5, 2, 2, Act::Elu)},
      {"e.conv3", conv_spec(2 * w, 4 * w, 5, 2, 2, Act::Elu)},
      {"e.fc", dense_spec(2 * kLatentDim, Act::None)},
  };
}

inline std::vector<NamedLayer> generator_layers(int w) {
  LayerSpec proj = dense_spec(16 * w * 11 * 2, Act::Relu);
  proj.reshape = {16 * w, 11, 2};
  return {
      {"g.fc", proj},
      {"g.tconv1", tconv_spec(16 * w, 8 * w, 3, 2, 1, 1, Act::Relu)},
      {"g.tconv2", tconv_spec(8 * w, 4 * w, 3, 2, 1, 1, Act::Relu)},
      {"g.tconv3", tconv_spec(4 * w, 2 * w, 3, 2, 1, 1, Act::Relu)},
      {"g.tconv4", tconv_spec(2 * w, w, 3, 1, 1, 0, Act::Relu)},
      {"g.conv_out", conv_spec(w, 1, 3, 1, 1, Act::Tanh)},
  };
}

inline std::vector<NamedLayer> discriminator_layers(int w) {
  return {
      {"d.conv1", conv_spec(1, w, 3, 1, 1, Act::LeakyRelu)},
      {"d.conv2", conv_spec(w, 2 * w, 3, 1, 1, Act::LeakyRelu)},
      {"d.conv3", conv_spec(2 * w, 4 * w, 3, 1, 1, Act::LeakyRelu)},
      {"d.conv4", conv_spec(4 * w, 8 * w, 3, 1, 1, Act::LeakyRelu)},
      {"d.conv_out", conv_spec(8 * w, 1, 3, 1, 1, Act::None)},
  };
}

// Input feature width of a dense layer, given the tensor entering it.
inline int dense_in_features(const std::array<int, 4>& in_shape) {
  return in_shape[1] * in_shape[2] * in_shape[3];
}

}  // namespace detail

template <typename T>
struct ModelT {
  ModelConfig cfg;
  ModelStateT<T> state;
  NetT<T> enc, gen, dis;

  static ModelT create(const ModelConfig& cfg, std::uint64_t seed);
  static ModelT from_state(ModelStateT<T> state);

  ParamT<T>& param(int idx) { return state.params[static_cast<std::size_t>(idx)]; }
  const ParamT<T>& param(int idx) const { return state.params[static_cast<std::size_t>(idx)]; }
};

using Model = ModelT<float>;

namespace detail {

// Registers one network's parameters, inferring dense input widths by
// tracing shapes from `input_shape`.
template <typename T>
NetT<T> build_net(ModelStateT<T>& state, const std::vector<NamedLayer>& layers,
                  std::array<int, 4> shape, std::uint64_t seed, bool fresh) {
  NetT<T> net;
  for (const auto& [name, spec0] : layers) {
    LayerSpec spec = spec0;
    TensorT<T> w;
    int bias_len = 0;
    if (spec.kind == LayerKind::Dense) {
      const int in_f = dense_in_features(shape);
      w = TensorT<T>(1, 1, spec.units, in_f);
      bias_len = spec.units;
      shape = {shape[0], spec.units, 1, 1};
      if (spec.reshape[0] > 0) shape = {shape[0], spec.reshape[0], spec.reshape[1], spec.reshape[2]};
    } else if (spec.kind == LayerKind::Conv) {
      w = TensorT<T>(spec.out_channels, spec.in_channels, spec.kh, spec.kw);
      bias_len = spec.out_channels;
      shape = {shape[0], spec.out_channels, conv_out_extent(shape[2], spec.ph, spec.kh, spec.stride),
               conv_out_extent(shape[3], spec.pw, spec.kw, spec.stride)};
    } else {
      w = TensorT<T>(spec.in_channels, spec.out_channels, spec.kh, spec.kw);
      bias_len = spec.out_channels;
      shape = {shape[0], spec.out_channels,
               tconv_out_extent(shape[2], spec.ph, spec.kh, spec.stride, spec.oph),
               tconv_out_extent(shape[3], spec.pw, spec.kw, spec.stride, spec.opw)};
    }

    if (fresh) {
      // scale-preserving init: std = sqrt(2 / fan_in). The nets carry no
      // normalization layers, so a fixed small std would shrink signal
      // exponentially with depth and start feature-space losses at the
      // floating-point noise floor.
      double fan_in = 1.0;
      if (spec.kind == LayerKind::Dense) {
        fan_in = static_cast<double>(w.w());
      } else if (spec.kind == LayerKind::Conv) {
        fan_in = static_cast<double>(spec.in_channels) * spec.kh * spec.kw;
      } else {
        fan_in = static_cast<double>(spec.in_channels) * spec.kh * spec.kw /
                 (static_cast<double>(spec.stride) * spec.stride);
      }
      const double std_dev = std::sqrt(2.0 / fan_in);
      Pcg32 rng(derive_stream(seed, "init", fnv1a64(name)));
      for (auto& v : w.data) v = static_cast<T>(rng.next_gauss() * std_dev);
    }
    TensorT<T> b(1, 1, 1, bias_len);

    ParamT<T> pw{name + ".w", std::move(w), {}};
    ParamT<T> pb{name + ".b", std::move(b), {}};
    pw.adam.resize(pw.value.data.size());
    pb.adam.resize(pb.value.data.size());
    pw.value.alloc_grad();
    pb.value.alloc_grad();

    net.layers.push_back(spec);
    state.params.push_back(std::move(pw));
    net.weight_idx.push_back(static_cast<int>(state.params.size()) - 1);
    state.params.push_back(std::move(pb));
    net.bias_idx.push_back(static_cast<int>(state.params.size()) - 1);
  }
  return net;
}

}  // namespace detail

template <typename T>
ModelT<T> ModelT<T>::create(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.width < 1) throw ConfigError("model width must be >= 1");
  ModelT<T> m;
  m.cfg = cfg;
  m.state.seed = seed;
  m.enc = detail::build_net(m.state, detail::encoder_layers(cfg.width), {1, 1, kBarRows, kBarCols},
                            seed, true);
  m.gen = detail::build_net(m.state, detail::generator_layers(cfg.width), {1, kLatentDim, 1, 1},
                            seed, true);
  m.dis = detail::build_net(m.state, detail::discriminator_layers(cfg.width),
                            {1, 1, kBarRows, kBarCols}, seed, true);
  return m;
}

// Rebuilds a model around loaded parameters; the width factor is recovered
// from the first encoder conv and all shapes are cross-checked against it.
template <typename T>
ModelT<T> ModelT<T>::from_state(ModelStateT<T> state) {
  int width = 0;
  for (const auto& p : state.params)
    if (p.name == "e.conv1.w") width = p.value.n();
  if (width < 1) throw Error("state does not contain e.conv1.w");

  ModelT<T> expect = ModelT<T>::create({width}, 0);
  if (expect.state.params.size() != state.params.size())
    throw Error("state has " + std::to_string(state.params.size()) + " parameters, architecture needs " +
                std::to_string(expect.state.params.size()));
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const auto& got = state.params[i];
    const auto& want = expect.state.params[i];
    if (got.name != want.name || got.value.shape != want.value.shape)
      throw Error("parameter " + got.name + " " + got.value.shape_str() +
                  " does not match architecture slot " + want.name + " " + want.value.shape_str());
  }

  ModelT<T> m;
  m.cfg = {width};
  m.enc = std::move(expect.enc);
  m.gen = std::move(expect.gen);
  m.dis = std::move(expect.dis);
  m.state = std::move(state);
  for (auto& p : m.state.params) {
    if (p.adam.m.size() != p.value.data.size()) p.adam.resize(p.value.data.size());
    p.value.alloc_grad();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sequential forward/backward.

template <typename T>
TensorT<T> net_forward(const ModelT<T>& model, const NetT<T>& net, const TensorT<T>& input,
                       NetCacheT<T>* cache) {
  if (cache != nullptr) {
    cache->pre.clear();
    cache->post.clear();
    cache->input = input;
  }
  TensorT<T> holder;
  const TensorT<T>* cur = &input;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& spec = net.layers[li];
    const TensorT<T>& w = model.param(net.weight_idx[li]).value;
    const std::vector<T>& b = model.param(net.bias_idx[li]).value.data;

    TensorT<T> pre;
    switch (spec.kind) {
      case LayerKind::Conv: pre = conv2d(*cur, w, b, spec); break;
      case LayerKind::TransposedConv: pre = transposed_conv2d(*cur, w, b, spec); break;
      case LayerKind::Dense: pre = dense(*cur, w, b); break;
    }
    TensorT<T> post = spec.act == Act::None ? pre : activation(pre, spec.act);
    if (spec.kind == LayerKind::Dense && spec.reshape[0] > 0)
      post = post.reshaped(spec.reshape[0], spec.reshape[1], spec.reshape[2]);

    if (cache != nullptr) {
      cache->pre.push_back(std::move(pre));
      cache->post.push_back(std::move(post));
      cur = &cache->post.back();
    } else {
      holder = std::move(post);
      cur = &holder;
    }
  }
  return *cur;
}

// Walks the net in reverse from d(output). Parameter gradients accumulate
// into each parameter tensor's grad buffer when `accumulate_params` is set;
// the gradient w.r.t. the net input is returned when `want_input_grad`.
template <typename T>
TensorT<T> net_backward(ModelT<T>& model, const NetT<T>& net, const NetCacheT<T>& cache,
                        const TensorT<T>& d_output, bool accumulate_params, bool want_input_grad) {
  TensorT<T> dy = d_output;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const LayerSpec& spec = net.layers[li];
    const TensorT<T>& x = cache.layer_input(li);
    const TensorT<T>& pre = cache.pre[static_cast<std::size_t>(li)];
    const TensorT<T>& post = cache.post[static_cast<std::size_t>(li)];
    const TensorT<T>& w = model.param(net.weight_idx[li]).value;

    if (spec.kind == LayerKind::Dense && spec.reshape[0] > 0)
      dy = dy.reshaped(pre.c(), pre.h(), pre.w());
    if (spec.act != Act::None) {
      // post was reshaped for dense layers; derivative only needs values
      TensorT<T> post_flat = post;
      post_flat.shape = pre.shape;
      dy = activation_backward(pre, post_flat, dy, spec.act);
    }

    const bool need_dx = want_input_grad || li > 0;
    TensorT<T> dx;
    TensorT<T> dw;
    std::vector<T> db;
    TensorT<T>* dxp = need_dx ? &dx : nullptr;
    TensorT<T>* dwp = accumulate_params ? &dw : nullptr;
    std::vector<T>* dbp = accumulate_params ? &db : nullptr;

    switch (spec.kind) {
      case LayerKind::Conv: conv2d_backward(x, w, spec, dy, dxp, dwp, dbp); break;
      case LayerKind::TransposedConv: transposed_conv2d_backward(x, w, spec, dy, dxp, dwp, dbp); break;
      case LayerKind::Dense: dense_backward(x, w, dy, dxp, dwp, dbp); break;
    }

    if (accumulate_params) {
      auto& wp = model.param(net.weight_idx[li]).value;
      auto& bp = model.param(net.bias_idx[li]).value;
      if (wp.grad.size() != wp.data.size()) wp.alloc_grad();
      if (bp.grad.size() != bp.data.size()) bp.alloc_grad();
      for (std::size_t i = 0; i < dw.data.size(); ++i) wp.grad[i] += dw.data[i];
      for (std::size_t i = 0; i < db.size(); ++i) bp.grad[i] += db[i];
    }
    if (!need_dx) break;
    dy = std::move(dx);
  }
  return dy;
}

// ---------------------------------------------------------------------------
// Batched network heads.

template <typename T>
struct LatentParamsBatchT {
  TensorT<T> mu;       // (n, 128, 1, 1)
  TensorT<T> log_var;  // (n, 128, 1, 1)
};

template <typename T>
struct DiscOutputBatchT {
  TensorT<T> features;    // (n, 1, 88, 16)
  std::vector<T> logits;  // per-sample mean of the feature map
  std::vector<T> probs;
};

template <typename T>
void check_frame_batch(const TensorT<T>& x) {
  if (x.c() != 1 || x.h() != kBarRows || x.w() != kBarCols)
    throw ShapeError("expected (n,1,88,16) frame batch, got " + x.shape_str());
  if (x.n() < 1) throw ShapeError("empty batch");
}

template <typename T>
LatentParamsBatchT<T> encode_batch(const ModelT<T>& model, const TensorT<T>& frames,
                                   NetCacheT<T>* cache = nullptr) {
  check_frame_batch(frames);
  TensorT<T> head = net_forward(model, model.enc, frames, cache);  // (n, 256, 1, 1)
  const int n = head.n();
  LatentParamsBatchT<T> out{TensorT<T>(n, kLatentDim, 1, 1), TensorT<T>(n, kLatentDim, 1, 1)};
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < kLatentDim; ++i) {
      out.mu.data[static_cast<std::size_t>(b) * kLatentDim + i] =
          head.data[static_cast<std::size_t>(b) * 2 * kLatentDim + i];
      out.log_var.data[static_cast<std::size_t>(b) * kLatentDim + i] =
          head.data[static_cast<std::size_t>(b) * 2 * kLatentDim + kLatentDim + i];
    }
  return out;
}

// z = mu + noise * exp(log_var), elementwise.
template <typename T>
TensorT<T> reparameterize_batch(const LatentParamsBatchT<T>& p, const TensorT<T>& noise) {
  if (noise.shape != p.mu.shape) throw ShapeError("noise shape != latent shape");
  TensorT<T> z = p.mu;
  for (std::size_t i = 0; i < z.data.size(); ++i)
    z.data[i] += noise.data[i] * static_cast<T>(std::exp(static_cast<double>(p.log_var.data[i])));
  return z;
}

template <typename T>
TensorT<T> generate_batch(const ModelT<T>& model, const TensorT<T>& z,
                          NetCacheT<T>* cache = nullptr) {
  if (z.c() != kLatentDim || z.h() != 1 || z.w() != 1)
    throw ShapeError("expected (n,128,1,1) latent batch, got " + z.shape_str());
  if (!z.all_finite()) throw Error("generate: non-finite latent input");
  TensorT<T> t = net_forward(model, model.gen, z, cache);  // tanh output in [-1,1]
  for (T& v : t.data) v = (v + T(1)) / T(2);
  return t;
}

template <typename T>
DiscOutputBatchT<T> discriminate_batch(const ModelT<T>& model, const TensorT<T>& frames,
                                       NetCacheT<T>* cache = nullptr) {
  check_frame_batch(frames);
  DiscOutputBatchT<T> out;
  out.features = net_forward(model, model.dis, frames, cache);  // (n,1,88,16)
  const int n = out.features.n();
  const std::int64_t len = out.features.numel() / n;
  out.logits.resize(static_cast<std::size_t>(n));
  out.probs.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    T acc = T(0);
    for (std::int64_t i = 0; i < len; ++i)
      acc += out.features.data[static_cast<std::size_t>(b * len + i)];
    const T logit = acc / static_cast<T>(len);
    out.logits[static_cast<std::size_t>(b)] = logit;
    out.probs[static_cast<std::size_t>(b)] = static_cast<T>(sigmoid(static_cast<double>(logit)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-frame convenience API.

template <typename T>
TensorT<T> frame_to_tensor(const PianoRollBar& bar) {
  TensorT<T> x(1, 1, kBarRows, kBarCols);
  for (std::size_t i = 0; i < bar.values.size(); ++i) x.data[i] = static_cast<T>(bar.values[i]);
  return x;
}

template <typename T>
PianoRollBar tensor_to_frame(const TensorT<T>& x, int batch_index = 0) {
  PianoRollBar bar;
  const std::size_t off = static_cast<std::size_t>(batch_index) * kBarRows * kBarCols;
  for (std::size_t i = 0; i < bar.values.size(); ++i) {
    float v = static_cast<float>(x.data[off + i]);
    bar.values[i] = std::min(1.0f, std::max(0.0f, v));
  }
  return bar;
}

inline LatentParams encode(const Model& model, const PianoRollBar& frame) {
  auto batch = encode_batch(model, frame_to_tensor<float>(frame));
  return {batch.mu.data, batch.log_var.data};
}

inline LatentSample reparameterize(const LatentParams& params, const std::vector<float>& noise) {
  if (params.mu.size() != static_cast<std::size_t>(kLatentDim) ||
      params.log_var.size() != params.mu.size() || noise.size() != params.mu.size())
    throw ShapeError("reparameterize: vectors must all be 128-dim");
  LatentSample s;
  s.params = params;
  s.noise = noise;
  s.z.resize(noise.size());
  for (std::size_t i = 0; i < noise.size(); ++i)
    s.z[i] = params.mu[i] + noise[i] * std::exp(params.log_var[i]);
  return s;
}

inline PianoRollBar generate(const Model& model, std::span<const float> z) {
  if (z.size() != static_cast<std::size_t>(kLatentDim))
    throw ShapeError("generate: latent must be 128-dim");
  TensorT<float> zt(1, kLatentDim, 1, 1);
  std::copy(z.begin(), z.end(), zt.data.begin());
  return tensor_to_frame(generate_batch(model, zt));
}

inline DiscriminatorOutput discriminate(const Model& model, const PianoRollBar& frame) {
  auto batch = discriminate_batch(model, frame_to_tensor<float>(frame));
  DiscriminatorOutput out;
  out.prob = batch.probs[0];
  out.features = batch.features.data;
  return out;
}

}  // namespace srvg

#endif  // SRVG_MODEL_HPP
