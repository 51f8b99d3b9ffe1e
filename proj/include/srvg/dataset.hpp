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
// Piano-roll corpus container:
//   magic "SRVD", u16 LE version = 1, u32 LE h = 88, u32 LE w = 16,
//   u32 LE sequence count, u32 LE bar count per sequence,
//   then all bars as f32 LE row-major, sequence by sequence.

#ifndef SRVG_DATASET_HPP
#define SRVG_DATASET_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "srvg/common.hpp"
#include "srvg/pianoroll.hpp"

namespace srvg {

constexpr std::uint16_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> dataset_bytes(const std::vector<PianoRollSequence>& corpus) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'S', 'R', 'V', 'D'});
  put_u16le(out, kDatasetVersion);
  put_u32le(out, kBarRows);
  put_u32le(out, kBarCols);
  put_u32le(out, static_cast<std::uint32_t>(corpus.size()));
  for (const auto& seq : corpus) put_u32le(out, static_cast<std::uint32_t>(seq.bars.size()));
  for (const auto& seq : corpus)
    for (const auto& bar : seq.bars)
      for (float v : bar.values) put_f32le(out, v);
  return out;
}

inline std::vector<PianoRollSequence> dataset_from_bytes(const std::vector<std::uint8_t>& bytes,
                                                         const std::string& origin = "") {
  LeReader r(bytes.data(), bytes.size());
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != "SRVD") throw IoError("not a dataset file: bad magic");
  const std::uint16_t version = r.u16();
  if (version != kDatasetVersion)
    throw IoError("unsupported dataset version " + std::to_string(version));
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  if (h != kBarRows || w != kBarCols)
    throw IoError("dataset bar shape " + std::to_string(h) + "x" + std::to_string(w) +
                  " does not match expected 88x16");
  const std::uint32_t n_seq = r.u32();
  std::vector<std::uint32_t> counts(n_seq);
  for (auto& c : counts) c = r.u32();

  std::vector<PianoRollSequence> corpus;
  corpus.reserve(n_seq);
  for (std::uint32_t s = 0; s < n_seq; ++s) {
    PianoRollSequence seq;
    seq.source = origin.empty() ? ("sequence " + std::to_string(s)) : (origin + "#" + std::to_string(s));
    seq.bars.resize(counts[s]);
    for (auto& bar : seq.bars)
      for (auto& v : bar.values) v = r.f32();
    corpus.push_back(std::move(seq));
  }
  if (r.remaining() != 0) throw IoError("dataset has trailing bytes after payload");
  return corpus;
}

inline void save_dataset(const std::vector<PianoRollSequence>& corpus, const std::string& path) {
  const auto bytes = dataset_bytes(corpus);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open dataset for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to dataset: " + path);
}

inline std::vector<PianoRollSequence> load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return dataset_from_bytes(bytes, path);
}

}  // namespace srvg

#endif  // SRVG_DATASET_HPP
