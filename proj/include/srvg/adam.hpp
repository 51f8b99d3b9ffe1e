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

#ifndef SRVG_ADAM_HPP
#define SRVG_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "srvg/common.hpp"

namespace srvg {

/// Per-parameter Adam moment buffers and hyperparameters.
template <typename T>
struct AdamStateT {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t step = 0;
  T beta1 = T(0.5);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T lr = T(5e-4);

  void resize(std::size_t n) {
    m.assign(n, T(0));
    v.assign(n, T(0));
  }
};

using AdamState = AdamStateT<float>;

/// One bias-corrected Adam step. A non-finite gradient rejects the whole
/// update: parameters and state are left untouched.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamStateT<T>& state) {
  if (param.size() != grad.size() || state.m.size() != param.size() ||
      state.v.size() != param.size())
    throw ShapeError("adam_update: parameter/gradient/moment lengths disagree");
  for (const T& g : grad)
    if (!std::isfinite(static_cast<double>(g)))
      throw Error("adam_update: non-finite gradient, update rejected");

  state.step += 1;
  const double b1 = static_cast<double>(state.beta1);
  const double b2 = static_cast<double>(state.beta2);
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = static_cast<double>(state.lr);
  const double eps = static_cast<double>(state.eps);

  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = b1 * static_cast<double>(state.m[i]) + (1.0 - b1) * g;
    const double v = b2 * static_cast<double>(state.v[i]) + (1.0 - b2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double m_hat = m / corr1;
    const double v_hat = v / corr2;
    param[i] = static_cast<T>(static_cast<double>(param[i]) - lr * m_hat / (std::sqrt(v_hat) + eps));
  }
}

}  // namespace srvg

#endif  // SRVG_ADAM_HPP
