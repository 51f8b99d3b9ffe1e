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
// Checkpoint container:
//   magic "SRVG", u16 LE version,
//   per-parameter records: u16 LE name length, UTF-8 name, 4x u32 LE shape,
//     f32 LE data, f32 LE Adam m, f32 LE Adam v, u64 LE step,
//   trailing u64 LE global iteration, u64 LE RNG seed.

#ifndef SRVG_CHECKPOINT_HPP
#define SRVG_CHECKPOINT_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "srvg/common.hpp"
#include "srvg/model.hpp"

namespace srvg {

constexpr std::uint16_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> checkpoint_bytes(const ModelState& state) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'S', 'R', 'V', 'G'});
  put_u16le(out, kCheckpointVersion);
  for (const auto& p : state.params) {
    put_u16le(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    for (int d : p.value.shape) put_u32le(out, static_cast<std::uint32_t>(d));
    for (float v : p.value.data) put_f32le(out, v);
    for (float v : p.adam.m) put_f32le(out, v);
    for (float v : p.adam.v) put_f32le(out, v);
    put_u64le(out, p.adam.step);
  }
  put_u64le(out, state.iteration);
  put_u64le(out, state.seed);
  return out;
}

inline ModelState checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes) {
  LeReader r(bytes.data(), bytes.size());
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != "SRVG") throw IoError("not a checkpoint file: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  ModelState state;
  while (r.remaining() > 16) {
    ParamT<float> p;
    const std::uint16_t name_len = r.u16();
    p.name.resize(name_len);
    r.bytes(p.name.data(), name_len);
    int shape[4];
    for (int& d : shape) {
      const std::uint32_t v = r.u32();
      if (v > (1u << 28)) throw IoError("implausible tensor extent in checkpoint");
      d = static_cast<int>(v);
    }
    p.value = Tensor(shape[0], shape[1], shape[2], shape[3]);
    const std::size_t n = p.value.data.size();
    p.adam.m.resize(n);
    p.adam.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.value.data[i] = r.f32();
    for (std::size_t i = 0; i < n; ++i) p.adam.m[i] = r.f32();
    for (std::size_t i = 0; i < n; ++i) p.adam.v[i] = r.f32();
    p.adam.step = r.u64();
    state.params.push_back(std::move(p));
  }
  if (r.remaining() != 16) throw IoError("malformed checkpoint: bad trailing record");
  state.iteration = r.u64();
  state.seed = r.u64();
  return state;
}

inline void save_checkpoint(const ModelState& state, const std::string& path) {
  const auto bytes = checkpoint_bytes(state);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to checkpoint: " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

}  // namespace srvg

#endif  // SRVG_CHECKPOINT_HPP
