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
// Sequential bar generation by latent chaining. Mode 1 seeds the chain with
// a real bar; mode 2 synthesizes the first bar from pure noise and chains
// from there. Only the previous generated bar feeds the next step; there is
// no hidden state.

#ifndef SRVG_GENERATION_HPP
#define SRVG_GENERATION_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "srvg/model.hpp"
#include "srvg/pianoroll.hpp"
#include "srvg/rng.hpp"

namespace srvg {

struct GenSpec {
  int mode = 2;  // 1: seed from a real bar; 2: seed from noise
  int n_bars = 1;
  std::uint64_t seed = 0;
  std::optional<PianoRollBar> seed_bar;  // required for mode 1
  bool include_seed = false;             // mode 1: prepend the seed bar
  bool deterministic = false;            // take z = mu instead of sampling

  void validate() const {
    if (mode != 1 && mode != 2) throw ConfigError("generation mode must be 1 or 2");
    if (n_bars < 1) throw ConfigError("n_bars must be >= 1");
    if (mode == 1 && !seed_bar.has_value())
      throw ConfigError("mode 1 requires a seed bar");
  }
};

struct GenStats {
  int encode_calls = 0;
  int generate_calls = 0;
};

// Encode-sample-generate chain from `current`, consuming one noise vector
// per produced bar.
inline std::vector<PianoRollBar> generate_chain(const Model& model, PianoRollBar current,
                                                const std::vector<std::vector<float>>& noises,
                                                bool deterministic = false,
                                                GenStats* stats = nullptr) {
  std::vector<PianoRollBar> bars;
  bars.reserve(noises.size());
  for (const auto& noise : noises) {
    const LatentParams params = encode(model, current);
    if (stats != nullptr) ++stats->encode_calls;
    std::vector<float> z;
    if (deterministic) {
      z = params.mu;
    } else {
      z = reparameterize(params, noise).z;
    }
    current = generate(model, z);
    if (stats != nullptr) ++stats->generate_calls;
    bars.push_back(current);
  }
  return bars;
}

inline PianoRollSequence generate_sequence(const Model& model, const GenSpec& spec,
                                           GenStats* stats = nullptr) {
  spec.validate();
  PianoRollSequence out;
  out.source = spec.mode == 1 ? "generated:mode1" : "generated:mode2";

  auto noise_at = [&](int i) {
    Pcg32 rng(derive_stream(spec.seed, "gen", static_cast<std::uint64_t>(i)));
    return rng.gauss_vector<float>(kLatentDim);
  };

  PianoRollBar current;
  int chained = spec.n_bars;
  if (spec.mode == 1) {
    current = *spec.seed_bar;
    if (spec.include_seed) out.bars.push_back(current);
  } else {
    const std::vector<float> z_p = noise_at(0);
    current = generate(model, z_p);
    if (stats != nullptr) ++stats->generate_calls;
    out.bars.push_back(current);
    chained -= 1;
  }

  std::vector<std::vector<float>> noises;
  noises.reserve(static_cast<std::size_t>(chained));
  const int base = spec.mode == 1 ? 0 : 1;
  for (int i = 0; i < chained; ++i) noises.push_back(noise_at(base + i));
  auto bars = generate_chain(model, current, noises, spec.deterministic, stats);
  out.bars.insert(out.bars.end(), bars.begin(), bars.end());
  return out;
}

}  // namespace srvg

#endif  // SRVG_GENERATION_HPP
