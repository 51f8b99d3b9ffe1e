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

#ifndef SRVG_TENSOR_HPP
#define SRVG_TENSOR_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "srvg/common.hpp"

namespace srvg {

/// Dense 4-D array in (batch, channels, height, width) order, row-major,
/// with an optional gradient buffer of the same extent.
template <typename T>
struct TensorT {
  std::array<int, 4> shape{0, 0, 0, 0};
  std::vector<T> data;
  std::vector<T> grad;  // empty unless alloc_grad() was called

  TensorT() = default;
  TensorT(int n, int c, int h, int w)
      : shape{n, c, h, w}, data(static_cast<std::size_t>(n) * c * h * w, T(0)) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw ShapeError("negative tensor extent");
  }

  int n() const { return shape[0]; }
  int c() const { return shape[1]; }
  int h() const { return shape[2]; }
  int w() const { return shape[3]; }

  std::int64_t numel() const {
    return static_cast<std::int64_t>(shape[0]) * shape[1] * shape[2] * shape[3];
  }

  std::int64_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<std::int64_t>(in) * shape[1] + ic) * shape[2] + ih) * shape[3] + iw;
  }

  T& at(int in, int ic, int ih, int iw) { return data[static_cast<std::size_t>(index(in, ic, ih, iw))]; }
  const T& at(int in, int ic, int ih, int iw) const {
    return data[static_cast<std::size_t>(index(in, ic, ih, iw))];
  }

  void alloc_grad() { grad.assign(data.size(), T(0)); }
  void zero_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    else std::fill(grad.begin(), grad.end(), T(0));
  }

  bool all_finite() const {
    for (const T& v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  // Reinterprets the per-sample layout; total element count must match.
  TensorT reshaped(int c, int h, int w) const {
    TensorT out = *this;
    out.shape = {shape[0], c, h, w};
    if (out.numel() != numel())
      throw ShapeError("reshape from " + shape_str() + " to inconsistent extent");
    return out;
  }

  std::string shape_str() const {
    return "(" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," +
           std::to_string(shape[2]) + "," + std::to_string(shape[3]) + ")";
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape[0], shape[1], shape[2], shape[3]);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

using Tensor = TensorT<float>;

}  // namespace srvg

#endif  // SRVG_TENSOR_HPP
