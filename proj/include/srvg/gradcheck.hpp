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

#ifndef SRVG_GRADCHECK_HPP
#define SRVG_GRADCHECK_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace srvg {

constexpr double kGradCheckStep = 1e-5;

inline double rel_error(double a, double b) {
  const double scale = std::max({1e-6, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

// Central finite differences against an analytic gradient, in 64-bit.
// `x` is mutated in place while probing and restored afterwards; `loss`
// re-evaluates the scalar objective reading through `x`. Returns the worst
// relative error over the probed coordinates.
template <typename LossFn>
double grad_check(std::span<double> x, std::span<const double> analytic, LossFn&& loss,
                  std::span<const std::size_t> indices, double step = kGradCheckStep) {
  double worst = 0.0;
  for (std::size_t idx : indices) {
    const double saved = x[idx];
    x[idx] = saved + step;
    const double f_plus = loss();
    x[idx] = saved - step;
    const double f_minus = loss();
    x[idx] = saved;
    const double fd = (f_plus - f_minus) / (2.0 * step);
    worst = std::max(worst, rel_error(fd, analytic[idx]));
  }
  return worst;
}

// Probes every coordinate.
template <typename LossFn>
double grad_check(std::span<double> x, std::span<const double> analytic, LossFn&& loss,
                  double step = kGradCheckStep) {
  std::vector<std::size_t> all(x.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return grad_check(x, analytic, loss, std::span<const std::size_t>(all), step);
}

}  // namespace srvg

#endif  // SRVG_GRADCHECK_HPP
