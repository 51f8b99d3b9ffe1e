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
// Evaluation report assembly. Corpus metrics are reported next to the
// reference targets so runs can be compared by eye; no tolerance is
// attached to those references.

#ifndef SRVG_REPORT_HPP
#define SRVG_REPORT_HPP

#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "srvg/metrics.hpp"
#include "srvg/pianoroll.hpp"

namespace srvg {

struct ReferenceTargets {
  double scale_consistency = 87.0;
  double uniqueness = 37.0;
  int tone_span_min = 10;
  int tone_span_max = 21;
  double recurrence = 7.0;
  double diversity = 0.59;
};

namespace report_detail {

struct Aggregate {
  double sum = 0.0, lo = 0.0, hi = 0.0;
  int n = 0;
  void add(double v) {
    lo = n == 0 ? v : std::min(lo, v);
    hi = n == 0 ? v : std::max(hi, v);
    sum += v;
    ++n;
  }
  nlohmann::json to_json() const {
    if (n == 0) return nullptr;
    return nlohmann::json{{"mean", sum / n}, {"min", lo}, {"max", hi}};
  }
  double mean() const { return n == 0 ? 0.0 : sum / n; }
};

}  // namespace report_detail

inline nlohmann::json build_eval_report(const std::vector<PianoRollSequence>& samples) {
  if (samples.empty()) throw Error("no samples to evaluate");
  const ReferenceTargets ref;
  nlohmann::json report;
  report["notes"] = {
      {"scales", "24 diatonic scales (12 major + 12 natural minor)"},
      {"uniqueness_denominator", "total note events in the sample"},
      {"diversity_tokens", "per-step sets of sounding pitches"},
      {"recurrence", "pitch bigrams repeated beyond their first occurrence"},
  };
  report["reference"] = {
      {"scale_consistency", ref.scale_consistency},
      {"uniqueness", ref.uniqueness},
      {"tone_span_min", ref.tone_span_min},
      {"tone_span_max", ref.tone_span_max},
      {"recurrence", ref.recurrence},
      {"diversity", ref.diversity},
  };

  using report_detail::Aggregate;
  Aggregate a_scale, a_unique, a_vspan, a_recur, a_tspan;
  nlohmann::json per_sample = nlohmann::json::array();
  std::vector<std::vector<std::uint64_t>> token_seqs;
  token_seqs.reserve(samples.size());
  for (const auto& seq : samples) {
    const MetricsReport r = compute_metrics(seq);
    nlohmann::json j;
    j["source"] = seq.source;
    j["note_count"] = r.note_count;
    if (r.scale_consistency) {
      j["scale_consistency"] = *r.scale_consistency;
      a_scale.add(*r.scale_consistency);
    }
    if (r.uniqueness) {
      j["uniqueness"] = *r.uniqueness;
      a_unique.add(*r.uniqueness);
    }
    if (r.velocity_span) {
      j["velocity_span"] = *r.velocity_span;
      a_vspan.add(*r.velocity_span);
    }
    j["recurrence"] = r.recurrence;
    a_recur.add(r.recurrence);
    if (r.tone_span) {
      j["tone_span"] = *r.tone_span;
      a_tspan.add(*r.tone_span);
    }
    per_sample.push_back(std::move(j));
    token_seqs.push_back(step_tokens(seq));
  }
  report["samples"] = per_sample;
  report["aggregate"] = {
      {"scale_consistency", a_scale.to_json()}, {"uniqueness", a_unique.to_json()},
      {"velocity_span", a_vspan.to_json()},     {"recurrence", a_recur.to_json()},
      {"tone_span", a_tspan.to_json()},
  };
  const auto div = diversity(token_seqs);
  if (div) report["diversity"] = *div;
  return report;
}

// Plain-text table of corpus means against the reference values.
inline std::string render_comparison_table(const nlohmann::json& report) {
  std::ostringstream out;
  auto mean_of = [&](const char* key) -> std::string {
    const auto& agg = report["aggregate"][key];
    if (agg.is_null()) return "n/a";
    std::ostringstream v;
    v.precision(4);
    v << agg["mean"].get<double>();
    return v.str();
  };
  out << "metric              corpus mean   reference\n";
  out << "scale consistency   " << mean_of("scale_consistency") << "          ~87%\n";
  out << "uniqueness          " << mean_of("uniqueness") << "          ~37%\n";
  out << "velocity span       " << mean_of("velocity_span") << "          (oscillating)\n";
  out << "recurrence          " << mean_of("recurrence") << "          ~7\n";
  out << "tone span           " << mean_of("tone_span") << "          10..21\n";
  if (report.contains("diversity")) {
    std::ostringstream v;
    v.precision(4);
    v << report["diversity"].get<double>();
    out << "diversity           " << v.str() << "          ~0.59\n";
  } else {
    out << "diversity           n/a (needs >= 2 samples)\n";
  }
  return out.str();
}

}  // namespace srvg

#endif  // SRVG_REPORT_HPP
