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

#ifndef SRVG_PIANOROLL_HPP
#define SRVG_PIANOROLL_HPP

#include <string>
#include <utility>
#include <vector>

#include "srvg/common.hpp"

namespace srvg {

// One 0.125 s time step; 16 steps make a 2-second bar.
constexpr double kStepSeconds = 0.125;
constexpr int kBarRows = 88;       // pitches 21..108, row = pitch - 21
constexpr int kBarCols = 16;
constexpr int kLowestPitch = 21;
constexpr int kHighestPitch = 108;

/// One bar: 88x16 matrix of velocities normalized to [0,1].
struct PianoRollBar {
  std::vector<float> values = std::vector<float>(static_cast<std::size_t>(kBarRows) * kBarCols, 0.0f);

  float& at(int row, int col) { return values[static_cast<std::size_t>(row) * kBarCols + col]; }
  float at(int row, int col) const { return values[static_cast<std::size_t>(row) * kBarCols + col]; }

  bool in_range() const {
    for (float v : values)
      if (!(v >= 0.0f && v <= 1.0f)) return false;
    return true;
  }
};

struct PianoRollSequence {
  std::vector<PianoRollBar> bars;
  std::string source;
};

/// Sequential training pairs (bars[t-1], bars[t]); fewer than two bars
/// yields an empty list.
inline std::vector<std::pair<PianoRollBar, PianoRollBar>> make_pairs(const PianoRollSequence& seq) {
  std::vector<std::pair<PianoRollBar, PianoRollBar>> pairs;
  if (seq.bars.size() < 2) return pairs;
  pairs.reserve(seq.bars.size() - 1);
  for (std::size_t t = 1; t < seq.bars.size(); ++t)
    pairs.emplace_back(seq.bars[t - 1], seq.bars[t]);
  return pairs;
}

// Corpus-level pair collection; pairs never cross sequence boundaries.
inline std::vector<std::pair<PianoRollBar, PianoRollBar>> collect_pairs(
    const std::vector<PianoRollSequence>& corpus) {
  std::vector<std::pair<PianoRollBar, PianoRollBar>> pairs;
  for (const auto& seq : corpus) {
    auto p = make_pairs(seq);
    pairs.insert(pairs.end(), p.begin(), p.end());
  }
  return pairs;
}

}  // namespace srvg

#endif  // SRVG_PIANOROLL_HPP
