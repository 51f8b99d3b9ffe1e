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
// Training loop. Each step runs two encoder/generator updates followed by
// one discriminator update, each on a fresh forward pass with fresh noise.
// Gradient routing:
//   E minimizes L_l + L_prior; the feature-matching signal reaches E only
//     through the z -> G -> D(fake) path.
//   G minimizes the adversarial terms plus L_l through both of its outputs.
//   D minimizes its own binary objective; feature-matching gradients never
//     touch D parameters.

#ifndef SRVG_TRAINING_HPP
#define SRVG_TRAINING_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "srvg/adam.hpp"
#include "srvg/checkpoint.hpp"
#include "srvg/dataset.hpp"
#include "srvg/losses.hpp"
#include "srvg/model.hpp"
#include "srvg/pianoroll.hpp"
#include "srvg/rng.hpp"

namespace srvg {

struct TrainConfig {
  int batch_size = 64;
  double lr_eg = 5e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 300;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;  // iterations; 0 = final checkpoint only
  int width = 8;
  std::string dataset_path;
  std::string log_path;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr_eg > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (width < 1) throw ConfigError("width must be >= 1");
  }
};

inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not `key = value`");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "lr_eg") cfg.lr_eg = std::stod(value);
      else if (key == "lr_d") cfg.lr_d = std::stod(value);
      else if (key == "beta1") cfg.beta1 = std::stod(value);
      else if (key == "beta2") cfg.beta2 = std::stod(value);
      else if (key == "eps") cfg.eps = std::stod(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoi(value);
      else if (key == "width") cfg.width = std::stoi(value);
      else if (key == "dataset") cfg.dataset_path = value;
      else if (key == "log") cfg.log_path = value;
      else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key " + key + " has a malformed value: " + value);
    } catch (const std::out_of_range&) {
      throw ConfigError("config key " + key + " has an out-of-range value: " + value);
    }
  }
  return cfg;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// Installs the configured optimizer hyperparameters on every parameter.
template <typename T>
void configure_optimizer(ModelT<T>& model, const TrainConfig& cfg) {
  for (auto& p : model.state.params) {
    p.adam.beta1 = static_cast<T>(cfg.beta1);
    p.adam.beta2 = static_cast<T>(cfg.beta2);
    p.adam.eps = static_cast<T>(cfg.eps);
    p.adam.lr = static_cast<T>(p.name[0] == 'd' ? cfg.lr_d : cfg.lr_eg);
  }
}

// ---------------------------------------------------------------------------
// One forward pass over a batch of sequential-frame pairs.

enum class PassMode { EgTraining, DTraining, EvalOnly };

template <typename T>
struct PassT {
  TensorT<T> x_prev, x_cur;
  TensorT<T> noise1, noise2;  // z reparameterization noise; pure-noise latent
  NetCacheT<T> enc_cache, gen_fake_cache, gen_noise_cache;
  NetCacheT<T> dis_real_cache, dis_fake_cache, dis_noise_cache;
  LatentParamsBatchT<T> latent;
  TensorT<T> z, x_fake, x_noise;
  DiscOutputBatchT<T> d_real, d_fake, d_noise;
  LossReport losses;
};

template <typename T>
TensorT<T> gaussian_batch(Pcg32& rng, int n, int dim) {
  TensorT<T> t(n, dim, 1, 1);
  for (auto& v : t.data) v = static_cast<T>(rng.next_gauss());
  return t;
}

template <typename T>
PassT<T> run_pass(const ModelT<T>& model, const TensorT<T>& x_prev, const TensorT<T>& x_cur,
                  TensorT<T> noise1, TensorT<T> noise2, PassMode mode) {
  check_frame_batch(x_prev);
  check_frame_batch(x_cur);
  if (x_prev.n() != x_cur.n()) throw ShapeError("pair batch halves differ in size");
  const int B = x_prev.n();
  const bool eg = mode == PassMode::EgTraining;
  const bool d = mode == PassMode::DTraining;

  PassT<T> pass;
  pass.x_prev = x_prev;
  pass.x_cur = x_cur;
  pass.noise1 = std::move(noise1);
  pass.noise2 = std::move(noise2);

  pass.latent = encode_batch(model, pass.x_prev, eg ? &pass.enc_cache : nullptr);
  pass.z = reparameterize_batch(pass.latent, pass.noise1);
  pass.x_fake = generate_batch(model, pass.z, eg ? &pass.gen_fake_cache : nullptr);
  pass.x_noise = generate_batch(model, pass.noise2, eg ? &pass.gen_noise_cache : nullptr);
  pass.d_real = discriminate_batch(model, pass.x_cur, d ? &pass.dis_real_cache : nullptr);
  pass.d_fake = discriminate_batch(model, pass.x_fake, (eg || d) ? &pass.dis_fake_cache : nullptr);
  pass.d_noise = discriminate_batch(model, pass.x_noise, (eg || d) ? &pass.dis_noise_cache : nullptr);

  double l_prior = 0.0, l_fm = 0.0, l_d = 0.0, l_g_adv = 0.0;
  const std::size_t feat_len = static_cast<std::size_t>(kFeatureLen);
  for (int b = 0; b < B; ++b) {
    const std::size_t off = static_cast<std::size_t>(b) * kLatentDim;
    l_prior += kl_loss(std::span<const T>(&pass.latent.mu.data[off], kLatentDim),
                       std::span<const T>(&pass.latent.log_var.data[off], kLatentDim));
    const std::size_t foff = static_cast<std::size_t>(b) * feat_len;
    l_fm += feature_matching_loss(std::span<const T>(&pass.d_real.features.data[foff], feat_len),
                                  std::span<const T>(&pass.d_fake.features.data[foff], feat_len),
                                  std::span<const T>(&pass.d_noise.features.data[foff], feat_len));
    const double lr = static_cast<double>(pass.d_real.logits[static_cast<std::size_t>(b)]);
    const double lf = static_cast<double>(pass.d_fake.logits[static_cast<std::size_t>(b)]);
    const double ln = static_cast<double>(pass.d_noise.logits[static_cast<std::size_t>(b)]);
    l_d += discriminator_loss_logits(lr, lf, ln);
    l_g_adv += generator_adv_loss_logits(lf, ln);
  }
  l_prior /= B;
  l_fm /= B;
  l_d /= B;
  l_g_adv /= B;

  const struct {
    const char* name;
    double value;
  } parts[] = {{"l_prior", l_prior}, {"l_fm", l_fm}, {"l_d", l_d}, {"l_g", l_g_adv + l_fm}};
  for (const auto& part : parts)
    if (!std::isfinite(part.value)) throw Error(std::string("non-finite loss ") + part.name);
  pass.losses = assemble_report(l_prior, l_fm, l_d, l_g_adv + l_fm);
  return pass;
}

// Upstream gradient of a mean-of-feature-map logit head.
template <typename T>
TensorT<T> spread_logit_grad(const TensorT<T>& features, const std::vector<double>& dlogit) {
  TensorT<T> df(features.n(), features.c(), features.h(), features.w());
  const std::int64_t len = features.numel() / features.n();
  for (int b = 0; b < features.n(); ++b) {
    const T g = static_cast<T>(dlogit[static_cast<std::size_t>(b)] / static_cast<double>(len));
    for (std::int64_t i = 0; i < len; ++i) df.data[static_cast<std::size_t>(b * len + i)] = g;
  }
  return df;
}

// Which objective terms contribute gradients in an encoder/generator pass;
// training uses all of them, tests can isolate single terms.
struct EgTerms {
  bool feature_matching = true;
  bool prior = true;
  bool adversarial = true;
};

template <typename T>
void eg_backward(ModelT<T>& model, const PassT<T>& pass, const EgTerms& terms = {}) {
  const int B = pass.x_prev.n();
  const std::size_t feat_len = static_cast<std::size_t>(kFeatureLen);
  const T invB = T(1) / static_cast<T>(B);

  // d(L_l)/d(features) of the fake and noise branches
  TensorT<T> dfeat_fake_fm(B, 1, kBarRows, kBarCols);
  TensorT<T> dfeat_noise_fm(B, 1, kBarRows, kBarCols);
  if (terms.feature_matching) {
    for (std::size_t i = 0; i < dfeat_fake_fm.data.size(); ++i) {
      dfeat_fake_fm.data[i] = (pass.d_fake.features.data[i] - pass.d_real.features.data[i]) * invB;
      dfeat_noise_fm.data[i] = (pass.d_noise.features.data[i] - pass.d_real.features.data[i]) * invB;
    }
  }

  // adversarial gradients land on the mean logit
  std::vector<double> dlogit_fake(static_cast<std::size_t>(B), 0.0);
  std::vector<double> dlogit_noise(static_cast<std::size_t>(B), 0.0);
  if (terms.adversarial) {
    for (int b = 0; b < B; ++b) {
      const std::size_t i = static_cast<std::size_t>(b);
      dlogit_fake[i] = (sigmoid(static_cast<double>(pass.d_fake.logits[i])) - 1.0) / B;
      dlogit_noise[i] = (sigmoid(static_cast<double>(pass.d_noise.logits[i])) - 1.0) / B;
    }
  }

  // Fake branch. The feature-matching part is backed up separately because
  // only it may continue through z into the encoder.
  TensorT<T> dz_fm;
  bool have_dz = false;
  if (terms.feature_matching) {
    TensorT<T> dx_fake_fm = net_backward(model, model.dis, pass.dis_fake_cache, dfeat_fake_fm,
                                         /*accumulate_params=*/false, /*want_input_grad=*/true);
    for (auto& v : dx_fake_fm.data) v *= T(0.5);  // output affine (tanh+1)/2
    dz_fm = net_backward(model, model.gen, pass.gen_fake_cache, dx_fake_fm, true, true);
    have_dz = true;
  }
  if (terms.adversarial) {
    TensorT<T> dfeat_fake_adv = spread_logit_grad(pass.d_fake.features, dlogit_fake);
    TensorT<T> dx_fake_adv = net_backward(model, model.dis, pass.dis_fake_cache, dfeat_fake_adv,
                                          false, true);
    for (auto& v : dx_fake_adv.data) v *= T(0.5);
    net_backward(model, model.gen, pass.gen_fake_cache, dx_fake_adv, true, false);
  }

  // Noise branch: feature matching and adversarial terms share one walk.
  if (terms.feature_matching || terms.adversarial) {
    TensorT<T> dfeat_noise = dfeat_noise_fm;
    if (terms.adversarial) {
      TensorT<T> adv = spread_logit_grad(pass.d_noise.features, dlogit_noise);
      for (std::size_t i = 0; i < dfeat_noise.data.size(); ++i) dfeat_noise.data[i] += adv.data[i];
    }
    TensorT<T> dx_noise = net_backward(model, model.dis, pass.dis_noise_cache, dfeat_noise,
                                       false, true);
    for (auto& v : dx_noise.data) v *= T(0.5);
    net_backward(model, model.gen, pass.gen_noise_cache, dx_noise, true, false);
  }

  // Into the encoder: through the reparameterization, plus the prior term.
  TensorT<T> dmu(B, kLatentDim, 1, 1);
  TensorT<T> dlv(B, kLatentDim, 1, 1);
  if (have_dz) {
    for (std::size_t i = 0; i < dmu.data.size(); ++i) {
      dmu.data[i] = dz_fm.data[i];
      dlv.data[i] = dz_fm.data[i] * pass.noise1.data[i] *
                    static_cast<T>(std::exp(static_cast<double>(pass.latent.log_var.data[i])));
    }
  }
  if (terms.prior) {
    for (std::size_t i = 0; i < dmu.data.size(); ++i) {
      dmu.data[i] += pass.latent.mu.data[i] * invB;
      dlv.data[i] += static_cast<T>(
          0.5 * (std::exp(static_cast<double>(pass.latent.log_var.data[i])) - 1.0)) * invB;
    }
  }
  TensorT<T> dhead(B, 2 * kLatentDim, 1, 1);
  for (int b = 0; b < B; ++b)
    for (int i = 0; i < kLatentDim; ++i) {
      dhead.data[static_cast<std::size_t>(b) * 2 * kLatentDim + i] =
          dmu.data[static_cast<std::size_t>(b) * kLatentDim + i];
      dhead.data[static_cast<std::size_t>(b) * 2 * kLatentDim + kLatentDim + i] =
          dlv.data[static_cast<std::size_t>(b) * kLatentDim + i];
    }
  net_backward(model, model.enc, pass.enc_cache, dhead, true, false);
}

template <typename T>
void d_backward(ModelT<T>& model, const PassT<T>& pass) {
  const int B = pass.x_prev.n();
  std::vector<double> dl_real(static_cast<std::size_t>(B)), dl_fake(static_cast<std::size_t>(B)),
      dl_noise(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const std::size_t i = static_cast<std::size_t>(b);
    dl_real[i] = (sigmoid(static_cast<double>(pass.d_real.logits[i])) - 1.0) / B;
    dl_fake[i] = sigmoid(static_cast<double>(pass.d_fake.logits[i])) / B;
    dl_noise[i] = sigmoid(static_cast<double>(pass.d_noise.logits[i])) / B;
  }
  net_backward(model, model.dis, pass.dis_real_cache, spread_logit_grad(pass.d_real.features, dl_real),
               true, false);
  net_backward(model, model.dis, pass.dis_fake_cache, spread_logit_grad(pass.d_fake.features, dl_fake),
               true, false);
  net_backward(model, model.dis, pass.dis_noise_cache,
               spread_logit_grad(pass.d_noise.features, dl_noise), true, false);
}

// ---------------------------------------------------------------------------
// Parameter-group helpers.

template <typename T>
void zero_param_grads(ModelT<T>& model) {
  for (auto& p : model.state.params) p.value.zero_grad();
}

template <typename T>
void apply_adam_group(ModelT<T>& model, char group1, char group2 = '\0') {
  for (auto& p : model.state.params) {
    if (p.name[0] != group1 && p.name[0] != group2) continue;
    adam_update(std::span<T>(p.value.data), std::span<const T>(p.value.grad), p.adam);
  }
}

template <typename T>
struct ParamSnapshot {
  std::vector<std::vector<T>> data, m, v;
  std::vector<std::uint64_t> steps;
};

template <typename T>
ParamSnapshot<T> snapshot_params(const ModelT<T>& model) {
  ParamSnapshot<T> s;
  for (const auto& p : model.state.params) {
    s.data.push_back(p.value.data);
    s.m.push_back(p.adam.m);
    s.v.push_back(p.adam.v);
    s.steps.push_back(p.adam.step);
  }
  return s;
}

template <typename T>
void restore_params(ModelT<T>& model, const ParamSnapshot<T>& s) {
  for (std::size_t i = 0; i < model.state.params.size(); ++i) {
    auto& p = model.state.params[i];
    p.value.data = s.data[i];
    p.adam.m = s.m[i];
    p.adam.v = s.v[i];
    p.adam.step = s.steps[i];
  }
}

// ---------------------------------------------------------------------------
// One training iteration: (E,G) twice, then D once. A non-finite loss in
// any pass aborts the step and restores every parameter bit-for-bit.

template <typename T>
LossReport train_step(ModelT<T>& model, const TensorT<T>& x_prev, const TensorT<T>& x_cur,
                      const TrainConfig& cfg, std::uint64_t iter) {
  if (x_prev.n() < 1) throw ConfigError("empty batch");
  const ParamSnapshot<T> snapshot = snapshot_params(model);
  const int B = x_prev.n();
  try {
    LossReport report;
    for (int sub = 0; sub < 3; ++sub) {
      Pcg32 rng(derive_stream(cfg.seed, "iter", iter, static_cast<std::uint64_t>(sub)));
      TensorT<T> noise1 = gaussian_batch<T>(rng, B, kLatentDim);
      TensorT<T> noise2 = gaussian_batch<T>(rng, B, kLatentDim);
      const bool is_eg = sub < 2;
      PassT<T> pass = run_pass(model, x_prev, x_cur, std::move(noise1), std::move(noise2),
                               is_eg ? PassMode::EgTraining : PassMode::DTraining);
      zero_param_grads(model);
      if (is_eg) {
        eg_backward(model, pass);
        apply_adam_group(model, 'e', 'g');
      } else {
        d_backward(model, pass);
        apply_adam_group(model, 'd');
      }
      report = pass.losses;
    }
    model.state.iteration += 1;
    return report;
  } catch (...) {
    restore_params(model, snapshot);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Epoch loop with seeded shuffling, JSON-line logging and checkpointing.

using PairList = std::vector<std::pair<PianoRollBar, PianoRollBar>>;

template <typename T>
void batch_from_pairs(const PairList& pairs, const std::vector<std::uint32_t>& order,
                      std::size_t start, int batch, TensorT<T>& x_prev, TensorT<T>& x_cur) {
  x_prev = TensorT<T>(batch, 1, kBarRows, kBarCols);
  x_cur = TensorT<T>(batch, 1, kBarRows, kBarCols);
  const std::size_t frame = static_cast<std::size_t>(kBarRows) * kBarCols;
  for (int b = 0; b < batch; ++b) {
    const auto& [prev, cur] = pairs[order[start + static_cast<std::size_t>(b)]];
    for (std::size_t i = 0; i < frame; ++i) {
      x_prev.data[static_cast<std::size_t>(b) * frame + i] = static_cast<T>(prev.values[i]);
      x_cur.data[static_cast<std::size_t>(b) * frame + i] = static_cast<T>(cur.values[i]);
    }
  }
}

inline std::vector<std::uint32_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                                   std::uint64_t epoch) {
  std::vector<std::uint32_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
  Pcg32 rng(derive_stream(seed, "shuffle", epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.next_below(static_cast<std::uint32_t>(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

struct TrainHooks {
  std::ostream* log = nullptr;
  std::string checkpoint_path;
  std::ostream* progress = nullptr;
};

template <typename T>
void train_loop(ModelT<T>& model, const PairList& pairs, const TrainConfig& cfg,
                const TrainHooks& hooks = {}) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("dataset contains no sequential pairs");
  if (cfg.epochs > 0 && static_cast<std::size_t>(cfg.batch_size) > pairs.size())
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds " +
                      std::to_string(pairs.size()) + " available pairs");
  configure_optimizer(model, cfg);
  model.state.seed = cfg.seed;

  // partial batches are dropped
  const std::uint64_t iters_per_epoch = pairs.size() / static_cast<std::size_t>(cfg.batch_size);
  const std::uint64_t target = static_cast<std::uint64_t>(cfg.epochs) * iters_per_epoch;

  std::vector<std::uint32_t> order;
  std::uint64_t order_epoch = ~0ULL;
  TensorT<T> x_prev, x_cur;
  while (model.state.iteration < target) {
    const std::uint64_t epoch = model.state.iteration / iters_per_epoch;
    const std::uint64_t pos = model.state.iteration % iters_per_epoch;
    if (epoch != order_epoch) {
      order = shuffled_indices(pairs.size(), cfg.seed, epoch);
      order_epoch = epoch;
    }
    const std::uint64_t iter = model.state.iteration + 1;
    batch_from_pairs(pairs, order, static_cast<std::size_t>(pos) * cfg.batch_size, cfg.batch_size,
                     x_prev, x_cur);
    const LossReport report = train_step(model, x_prev, x_cur, cfg, iter);
    if (hooks.log != nullptr) *hooks.log << loss_json_line(report, iter) << "\n";
    if (hooks.progress != nullptr && (iter % 50 == 0 || iter == target))
      *hooks.progress << "iter " << iter << "/" << target << " l_fm=" << report.l_fm
                      << " l_d=" << report.l_d << " l_g=" << report.l_g << "\n";
    if (!hooks.checkpoint_path.empty() && cfg.checkpoint_interval > 0 &&
        iter % static_cast<std::uint64_t>(cfg.checkpoint_interval) == 0) {
      if constexpr (std::is_same_v<T, float>) save_checkpoint(model.state, hooks.checkpoint_path);
    }
  }
  if (!hooks.checkpoint_path.empty()) {
    if constexpr (std::is_same_v<T, float>) save_checkpoint(model.state, hooks.checkpoint_path);
  }
}

}  // namespace srvg

#endif  // SRVG_TRAINING_HPP
