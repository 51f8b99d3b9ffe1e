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
// Sample statistics for generated music: scale consistency, uniqueness,
// velocity span, recurrence, tone span, and corpus diversity (mean
// normalized pairwise Levenshtein distance over per-step pitch-set tokens).

#ifndef SRVG_METRICS_HPP
#define SRVG_METRICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "srvg/common.hpp"
#include "srvg/midi.hpp"
#include "srvg/pianoroll.hpp"
#include "srvg/rng.hpp"

namespace srvg {

struct NoteEvent {
  int onset = 0;     // time step
  int pitch = 0;     // MIDI pitch 21..108
  int velocity = 0;  // 1..127
};

using NoteEventList = std::vector<NoteEvent>;

/// Canonical note list of a sample: thresholded cells merged into sustained
/// notes exactly as the MIDI exporter does, sorted by (onset, pitch).
inline NoteEventList extract_notes(const PianoRollSequence& seq) {
  NoteEventList notes;
  const int n_steps = static_cast<int>(seq.bars.size()) * kBarCols;
  auto cell = [&](int row, int step) {
    return seq.bars[static_cast<std::size_t>(step / kBarCols)].at(row, step % kBarCols);
  };
  for (int row = 0; row < kBarRows; ++row) {
    int step = 0;
    while (step < n_steps) {
      const float v = cell(row, step);
      const int vel = static_cast<int>(std::lround(v * 127.0));
      if (v < kNoteThreshold || vel < 1) {
        ++step;
        continue;
      }
      int end = step + 1;
      while (end < n_steps) {
        const float nv = cell(row, end);
        if (nv < kNoteThreshold || static_cast<int>(std::lround(nv * 127.0)) != vel) break;
        ++end;
      }
      notes.push_back({step, row + kLowestPitch, vel});
      step = end;
    }
  }
  std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
  });
  return notes;
}

// The 24 diatonic scales: 12 major and 12 natural-minor pitch-class sets.
inline const std::vector<std::array<bool, 12>>& scale_table() {
  static const std::vector<std::array<bool, 12>> table = [] {
    const int major[7] = {0, 2, 4, 5, 7, 9, 11};
    const int minor[7] = {0, 2, 3, 5, 7, 8, 10};
    std::vector<std::array<bool, 12>> t;
    for (int root = 0; root < 12; ++root) {
      std::array<bool, 12> maj{}, min{};
      for (int d : major) maj[static_cast<std::size_t>((root + d) % 12)] = true;
      for (int d : minor) min[static_cast<std::size_t>((root + d) % 12)] = true;
      t.push_back(maj);
      t.push_back(min);
    }
    return t;
  }();
  return table;
}

/// Percentage of note events matching the best of the 24 diatonic scales.
inline std::optional<double> scale_consistency(const NoteEventList& notes) {
  if (notes.empty()) return std::nullopt;
  int best = 0;
  for (const auto& scale : scale_table()) {
    int hits = 0;
    for (const auto& n : notes)
      if (scale[static_cast<std::size_t>(n.pitch % 12)]) ++hits;
    best = std::max(best, hits);
  }
  return 100.0 * best / static_cast<double>(notes.size());
}

/// Percentage of distinct pitches among all note events.
inline std::optional<double> uniqueness(const NoteEventList& notes) {
  if (notes.empty()) return std::nullopt;
  std::set<int> pitches;
  for (const auto& n : notes) pitches.insert(n.pitch);
  return 100.0 * static_cast<double>(pitches.size()) / static_cast<double>(notes.size());
}

inline std::optional<int> velocity_span(const NoteEventList& notes) {
  if (notes.empty()) return std::nullopt;
  auto [lo, hi] = std::minmax_element(notes.begin(), notes.end(),
                                      [](const NoteEvent& a, const NoteEvent& b) {
                                        return a.velocity < b.velocity;
                                      });
  return hi->velocity - lo->velocity;
}

/// Repeated pitch bigrams: total occurrences beyond each bigram's first.
inline int recurrence(const NoteEventList& notes) {
  if (notes.size() < 2) return 0;
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t i = 0; i + 1 < notes.size(); ++i)
    ++counts[{notes[i].pitch, notes[i + 1].pitch}];
  int repeats = 0;
  for (const auto& [bigram, count] : counts) repeats += std::max(count - 1, 0);
  return repeats;
}

inline std::optional<int> tone_span(const NoteEventList& notes) {
  if (notes.empty()) return std::nullopt;
  auto [lo, hi] = std::minmax_element(notes.begin(), notes.end(),
                                      [](const NoteEvent& a, const NoteEvent& b) {
                                        return a.pitch < b.pitch;
                                      });
  return hi->pitch - lo->pitch;
}

// ---------------------------------------------------------------------------
// Diversity.

inline std::size_t levenshtein(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  if (a.size() < b.size()) return levenshtein(b, a);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// One symbol per time step: a hash of the set of sounding pitches.
inline std::vector<std::uint64_t> step_tokens(const PianoRollSequence& seq) {
  const int n_steps = static_cast<int>(seq.bars.size()) * kBarCols;
  std::vector<std::uint64_t> tokens(static_cast<std::size_t>(n_steps));
  for (int step = 0; step < n_steps; ++step) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    const PianoRollBar& bar = seq.bars[static_cast<std::size_t>(step / kBarCols)];
    for (int row = 0; row < kBarRows; ++row)
      if (bar.at(row, step % kBarCols) >= kNoteThreshold)
        h = splitmix64(h ^ static_cast<std::uint64_t>(row + 1));
    tokens[static_cast<std::size_t>(step)] = h;
  }
  return tokens;
}

/// Mean normalized pairwise Levenshtein distance over the corpus, in [0,1].
inline std::optional<double> diversity(const std::vector<std::vector<std::uint64_t>>& token_seqs) {
  if (token_seqs.size() < 2) return std::nullopt;
  // pair distances are stored and reduced in index order so that parallel
  // evaluation cannot perturb the sum
  const std::size_t n = token_seqs.size();
  std::vector<double> dist(n * (n - 1) / 2, 0.0);
  std::size_t k = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs(dist.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs[k++] = {i, j};
  parallel_for(static_cast<std::int64_t>(pairs.size()), [&](std::int64_t p) {
    const auto& [i, j] = pairs[static_cast<std::size_t>(p)];
    const auto& a = token_seqs[i];
    const auto& b = token_seqs[j];
    const std::size_t longer = std::max(a.size(), b.size());
    dist[static_cast<std::size_t>(p)] =
        longer == 0 ? 0.0 : static_cast<double>(levenshtein(a, b)) / static_cast<double>(longer);
  });
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / static_cast<double>(dist.size());
}

// ---------------------------------------------------------------------------
// Reports.

struct MetricsReport {
  std::optional<double> scale_consistency;
  std::optional<double> uniqueness;
  std::optional<int> velocity_span;
  int recurrence = 0;
  std::optional<int> tone_span;
  std::optional<double> diversity;  // corpus-level only
  std::size_t note_count = 0;
};

inline MetricsReport compute_metrics(const PianoRollSequence& seq) {
  const NoteEventList notes = extract_notes(seq);
  MetricsReport r;
  r.note_count = notes.size();
  r.scale_consistency = scale_consistency(notes);
  r.uniqueness = uniqueness(notes);
  r.velocity_span = velocity_span(notes);
  r.recurrence = recurrence(notes);
  r.tone_span = tone_span(notes);
  return r;
}

}  // namespace srvg

#endif  // SRVG_METRICS_HPP
