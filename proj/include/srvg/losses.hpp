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
// Scalar objectives of the hybrid model: the KL prior term, pairwise
// feature matching, and the adversarial discriminator/generator losses.
// The log/sigmoid compositions are evaluated in logit space.

#ifndef SRVG_LOSSES_HPP
#define SRVG_LOSSES_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>

#include "srvg/common.hpp"

namespace srvg {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline void check_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(std::string(name) + " must lie strictly in (0,1), got " + std::to_string(p));
}

/// KL divergence of the encoder posterior from the unit Gaussian prior:
/// 0.5 * (mu'mu + sum(exp(eps) - eps - 1)). Non-negative, zero iff mu = eps = 0.
template <typename T>
double kl_loss(std::span<const T> mu, std::span<const T> log_var) {
  if (mu.size() != log_var.size()) throw ShapeError("kl_loss: mu and log_var lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = static_cast<double>(mu[i]);
    const double e = static_cast<double>(log_var[i]);
    acc += m * m + std::exp(e) - e - 1.0;
  }
  return 0.5 * acc;
}

/// Pairwise feature matching: 0.5*||f_real - f_fake||^2 + 0.5*||f_real - f_noise||^2.
template <typename T>
double feature_matching_loss(std::span<const T> f_real, std::span<const T> f_fake,
                             std::span<const T> f_noise) {
  if (f_real.size() != f_fake.size() || f_real.size() != f_noise.size())
    throw ShapeError("feature_matching_loss: feature lengths differ");
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < f_real.size(); ++i) {
    const double d1 = static_cast<double>(f_real[i]) - static_cast<double>(f_fake[i]);
    const double d2 = static_cast<double>(f_real[i]) - static_cast<double>(f_noise[i]);
    a += d1 * d1;
    b += d2 * d2;
  }
  return 0.5 * a + 0.5 * b;
}

// Logit-space forms used by training, where D produces pre-sigmoid scores.
inline double discriminator_loss_logits(double l_real, double l_fake, double l_noise) {
  // -(log s(l_r) + log(1 - s(l_f)) + log(1 - s(l_n)))
  return softplus(-l_real) + softplus(l_fake) + softplus(l_noise);
}

inline double generator_adv_loss_logits(double l_fake, double l_noise) {
  // -(log s(l_f) + log s(l_n))
  return softplus(-l_fake) + softplus(-l_noise);
}

/// -(log p_real + log(1-p_fake) + log(1-p_noise)); probabilities must lie in (0,1).
inline double discriminator_loss(double p_real, double p_fake, double p_noise) {
  check_probability(p_real, "p_real");
  check_probability(p_fake, "p_fake");
  check_probability(p_noise, "p_noise");
  return discriminator_loss_logits(logit(p_real), logit(p_fake), logit(p_noise));
}

/// -(log p_fake + log p_noise) + l_fm.
inline double generator_loss(double p_fake, double p_noise, double l_fm) {
  check_probability(p_fake, "p_fake");
  check_probability(p_noise, "p_noise");
  if (l_fm < 0.0) throw Error("generator_loss: feature-matching term must be >= 0");
  return generator_adv_loss_logits(logit(p_fake), logit(p_noise)) + l_fm;
}

/// One training iteration's scalar objectives.
struct LossReport {
  double l_prior = 0.0;
  double l_fm = 0.0;
  double l_e = 0.0;
  double l_d = 0.0;
  double l_g = 0.0;
  double total = 0.0;
};

inline LossReport assemble_report(double l_prior, double l_fm, double l_d, double l_g) {
  for (double v : {l_prior, l_fm, l_d, l_g})
    if (!std::isfinite(v)) throw Error("assemble_report: non-finite loss component");
  LossReport r;
  r.l_prior = l_prior;
  r.l_fm = l_fm;
  r.l_e = l_fm + l_prior;
  r.l_d = l_d;
  r.l_g = l_g;
  r.total = r.l_e + r.l_d + r.l_g;
  return r;
}

inline std::string loss_json_line(const LossReport& r, std::uint64_t iter) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  return "{\"iter\":" + std::to_string(iter) + ",\"l_prior\":" + num(r.l_prior) +
         ",\"l_fm\":" + num(r.l_fm) + ",\"l_e\":" + num(r.l_e) + ",\"l_d\":" + num(r.l_d) +
         ",\"l_g\":" + num(r.l_g) + ",\"total\":" + num(r.total) + "}";
}

}  // namespace srvg

#endif  // SRVG_LOSSES_HPP
