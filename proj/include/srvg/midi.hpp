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
// Standard MIDI File ingestion (formats 0 and 1) and format-0 export.
// All note tracks are flattened into one event stream; notes are placed on
// a 0.125 s grid to form 88x16 piano-roll bars.

#ifndef SRVG_MIDI_HPP
#define SRVG_MIDI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "srvg/common.hpp"
#include "srvg/pianoroll.hpp"

namespace srvg {

enum class MidiEventKind { NoteOn, NoteOff, Tempo, Other };

struct MidiEvent {
  std::uint32_t tick = 0;
  MidiEventKind kind = MidiEventKind::Other;
  std::uint8_t pitch = 0;
  std::uint8_t velocity = 0;
  std::uint32_t tempo_uspq = 0;  // microseconds per quarter, Tempo events only
};

struct MidiFile {
  std::uint16_t format = 0;
  std::uint16_t ticks_per_quarter = 480;
  std::vector<MidiEvent> events;  // merged across tracks, ordered by tick
};

namespace midi_detail {

// Big-endian cursor that refuses to read past `size`; offsets are absolute
// within the file so parse errors can name the failing byte.
class BeReader {
 public:
  BeReader(const std::uint8_t* data, std::size_t size, std::size_t base = 0)
      : data_(data), size_(size), base_(base) {}

  std::size_t pos() const { return base_ + pos_; }
  std::size_t local_pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }
  bool done() const { return pos_ >= size_; }

  std::uint8_t u8() {
    need(1, "byte");
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= size_) throw ParseError(pos(), "unexpected end of data");
    return data_[pos_];
  }
  std::uint16_t u16() {
    need(2, "u16");
    std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
  }
  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > size_)
      throw ParseError(pos(), std::string("truncated while reading ") + what);
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

// Variable-length quantity, at most 4 bytes per the SMF spec.
inline std::uint32_t read_vlq(BeReader& r) {
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) {
    const std::uint8_t byte = r.u8();
    value = (value << 7) | (byte & 0x7fu);
    if ((byte & 0x80u) == 0) return value;
  }
  throw ParseError(r.pos(), "variable-length quantity longer than 4 bytes");
}

inline void append_vlq(std::vector<std::uint8_t>& out, std::uint32_t value) {
  std::uint8_t stack[4];
  int n = 0;
  stack[n++] = static_cast<std::uint8_t>(value & 0x7fu);
  value >>= 7;
  while (value != 0) {
    stack[n++] = static_cast<std::uint8_t>(0x80u | (value & 0x7fu));
    value >>= 7;
  }
  while (n > 0) out.push_back(stack[--n]);
}

}  // namespace midi_detail

// Decodes one VLQ from raw bytes; exposed for tests and tooling.
inline std::uint32_t decode_vlq(const std::uint8_t* bytes, std::size_t size) {
  midi_detail::BeReader r(bytes, size);
  return midi_detail::read_vlq(r);
}

inline MidiFile parse_midi(const std::uint8_t* bytes, std::size_t size) {
  using midi_detail::BeReader;
  BeReader header(bytes, size);

  const std::uint8_t* magic = header.take(4, "chunk id");
  if (std::string(reinterpret_cast<const char*>(magic), 4) != "MThd")
    throw ParseError(0, "missing MThd magic");
  const std::uint32_t header_len = header.u32();
  if (header_len < 6) throw ParseError(header.pos(), "MThd chunk too short");
  MidiFile file;
  file.format = header.u16();
  if (file.format > 1)
    throw ParseError(header.pos() - 2, "unsupported SMF format " + std::to_string(file.format));
  const std::uint16_t ntrks = header.u16();
  const std::uint16_t division = header.u16();
  if (division & 0x8000u)
    throw ParseError(header.pos() - 2, "SMPTE time division not supported");
  if (division == 0) throw ParseError(header.pos() - 2, "zero ticks-per-quarter");
  file.ticks_per_quarter = division;
  header.skip(header_len - 6, "MThd padding");

  for (std::uint16_t trk = 0; trk < ntrks; ++trk) {
    const std::size_t chunk_at = header.pos();
    const std::uint8_t* id = header.take(4, "chunk id");
    const std::uint32_t chunk_len = header.u32();
    if (std::string(reinterpret_cast<const char*>(id), 4) != "MTrk") {
      // Alien chunks are legal in SMF; skip them without counting a track.
      header.skip(chunk_len, "alien chunk body");
      --trk;
      continue;
    }
    if (chunk_len > header.remaining())
      throw ParseError(chunk_at + 4, "MTrk length exceeds file size");

    BeReader track(header.take(chunk_len, "MTrk body"), chunk_len, chunk_at + 8);
    std::uint32_t tick = 0;
    std::uint8_t running_status = 0;
    bool ended = false;
    while (!track.done() && !ended) {
      tick += midi_detail::read_vlq(track);

      std::uint8_t status = track.peek();
      if (status & 0x80u) {
        track.u8();
        if (status < 0xf0u) running_status = status;
      } else {
        if (running_status == 0)
          throw ParseError(track.pos(), "data byte without running status");
        status = running_status;
      }

      MidiEvent ev;
      ev.tick = tick;
      switch (status & 0xf0u) {
        case 0x80u: {
          ev.kind = MidiEventKind::NoteOff;
          ev.pitch = track.u8() & 0x7fu;
          ev.velocity = track.u8() & 0x7fu;
          file.events.push_back(ev);
          break;
        }
        case 0x90u: {
          ev.pitch = track.u8() & 0x7fu;
          ev.velocity = track.u8() & 0x7fu;
          // note-on at velocity zero is a note-off
          ev.kind = ev.velocity == 0 ? MidiEventKind::NoteOff : MidiEventKind::NoteOn;
          file.events.push_back(ev);
          break;
        }
        case 0xa0u:
        case 0xb0u:
        case 0xe0u:
          track.skip(2, "channel event data");
          break;
        case 0xc0u:
        case 0xd0u:
          track.skip(1, "channel event data");
          break;
        case 0xf0u: {
          if (status == 0xffu) {
            const std::uint8_t type = track.u8();
            const std::uint32_t len = midi_detail::read_vlq(track);
            if (type == 0x51u) {
              if (len != 3) throw ParseError(track.pos(), "tempo meta event must carry 3 bytes");
              const std::uint8_t* d = track.take(3, "tempo data");
              ev.kind = MidiEventKind::Tempo;
              ev.tempo_uspq = (static_cast<std::uint32_t>(d[0]) << 16) |
                              (static_cast<std::uint32_t>(d[1]) << 8) | d[2];
              file.events.push_back(ev);
            } else {
              track.skip(len, "meta event data");
              if (type == 0x2fu) ended = true;
            }
          } else if (status == 0xf0u || status == 0xf7u) {
            const std::uint32_t len = midi_detail::read_vlq(track);
            track.skip(len, "sysex data");
          } else {
            throw ParseError(track.pos() - 1,
                             "invalid status byte 0x" + std::to_string(status));
          }
          running_status = 0;
          break;
        }
        default:
          throw ParseError(track.pos() - 1, "invalid status byte");
      }
    }
  }

  std::stable_sort(file.events.begin(), file.events.end(),
                   [](const MidiEvent& a, const MidiEvent& b) { return a.tick < b.tick; });
  return file;
}

inline MidiFile parse_midi(const std::vector<std::uint8_t>& bytes) {
  return parse_midi(bytes.data(), bytes.size());
}

inline MidiFile parse_midi_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open MIDI file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_midi(bytes);
}

// ---------------------------------------------------------------------------
// Roll conversion.

struct RollStats {
  int dropped_notes = 0;  // pitches outside [21,108]
};

namespace midi_detail {

// Piecewise-linear tick -> seconds map from tempo events (default 120 BPM).
class TempoMap {
 public:
  TempoMap(const std::vector<MidiEvent>& events, std::uint16_t tpq) : tpq_(tpq) {
    ticks_.push_back(0);
    secs_.push_back(0.0);
    uspq_.push_back(500000);
    for (const auto& ev : events) {
      if (ev.kind != MidiEventKind::Tempo || ev.tempo_uspq == 0) continue;
      if (ev.tick == ticks_.back()) {
        uspq_.back() = ev.tempo_uspq;
        continue;
      }
      const double sec = seconds(ev.tick);
      ticks_.push_back(ev.tick);
      secs_.push_back(sec);
      uspq_.push_back(ev.tempo_uspq);
    }
  }

  double seconds(std::uint32_t tick) const {
    std::size_t i = ticks_.size();
    while (i > 0 && ticks_[i - 1] > tick) --i;
    i = i == 0 ? 0 : i - 1;
    const double dt = static_cast<double>(tick) - static_cast<double>(ticks_[i]);
    return secs_[i] + dt * (static_cast<double>(uspq_[i]) * 1e-6) / tpq_;
  }

 private:
  std::uint16_t tpq_;
  std::vector<std::uint32_t> ticks_;
  std::vector<double> secs_;
  std::vector<std::uint32_t> uspq_;
};

struct NoteInterval {
  int start_step;
  int end_step;  // exclusive
  int pitch;
  std::uint8_t velocity;
};

}  // namespace midi_detail

inline PianoRollSequence to_piano_roll(const MidiFile& file, RollStats* stats = nullptr,
                                       const std::string& source = "") {
  PianoRollSequence seq;
  seq.source = source;
  if (file.events.empty()) return seq;

  midi_detail::TempoMap tempo(file.events, file.ticks_per_quarter);
  auto to_step = [&](std::uint32_t tick) {
    return static_cast<int>(std::floor(tempo.seconds(tick) / kStepSeconds + 0.5));
  };

  std::vector<midi_detail::NoteInterval> notes;
  std::map<int, std::pair<std::uint32_t, std::uint8_t>> active;  // pitch -> (on tick, velocity)
  std::uint32_t last_tick = 0;
  int dropped = 0;

  auto close_note = [&](int pitch, std::uint32_t on_tick, std::uint8_t vel, std::uint32_t off_tick) {
    if (pitch < kLowestPitch || pitch > kHighestPitch) {
      ++dropped;
      return;
    }
    const int s0 = to_step(on_tick);
    const int s1 = std::max(s0 + 1, to_step(off_tick));
    notes.push_back({s0, s1, pitch, vel});
  };

  for (const auto& ev : file.events) {
    last_tick = std::max(last_tick, ev.tick);
    if (ev.kind == MidiEventKind::NoteOn) {
      auto it = active.find(ev.pitch);
      if (it != active.end()) {
        // restrike: close the sounding note at the new onset
        close_note(ev.pitch, it->second.first, it->second.second, ev.tick);
        active.erase(it);
      }
      active[ev.pitch] = {ev.tick, ev.velocity};
    } else if (ev.kind == MidiEventKind::NoteOff) {
      auto it = active.find(ev.pitch);
      if (it != active.end()) {
        close_note(ev.pitch, it->second.first, it->second.second, ev.tick);
        active.erase(it);
      }
    }
  }
  // notes still sounding at end of file are closed at the final event tick
  for (const auto& [pitch, on] : active) close_note(pitch, on.first, on.second, last_tick);
  if (stats != nullptr) stats->dropped_notes = dropped;
  if (notes.empty()) return seq;

  int total_steps = 0;
  for (const auto& n : notes) total_steps = std::max(total_steps, n.end_step);
  const int n_bars = (total_steps + kBarCols - 1) / kBarCols;
  seq.bars.assign(static_cast<std::size_t>(n_bars), PianoRollBar{});

  for (const auto& n : notes) {
    const float value = static_cast<float>(n.velocity) / 127.0f;
    const int row = n.pitch - kLowestPitch;
    for (int s = n.start_step; s < n.end_step; ++s) {
      PianoRollBar& bar = seq.bars[static_cast<std::size_t>(s / kBarCols)];
      float& cell = bar.at(row, s % kBarCols);
      cell = std::max(cell, value);  // overlapping notes keep the loudest
    }
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Export: SMF format 0 at 120 BPM, one step = one sixteenth = 0.125 s.

constexpr double kNoteThreshold = 0.05;
constexpr int kExportTpq = 480;
constexpr int kTicksPerStep = kExportTpq / 4;

inline std::vector<std::uint8_t> midi_bytes(const PianoRollSequence& seq) {
  struct Note {
    int start_step, len_steps, pitch, velocity;
  };
  std::vector<Note> notes;
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
      // merge a run of equal quantized velocity into one sustained note
      int end = step + 1;
      while (end < n_steps) {
        const float nv = cell(row, end);
        if (nv < kNoteThreshold || static_cast<int>(std::lround(nv * 127.0)) != vel) break;
        ++end;
      }
      notes.push_back({step, end - step, row + kLowestPitch, vel});
      step = end;
    }
  }

  struct WireEvent {
    int tick;
    int order;  // offs sort before ons at the same tick
    std::uint8_t status, d1, d2;
  };
  std::vector<WireEvent> wire;
  wire.reserve(notes.size() * 2);
  for (const auto& n : notes) {
    wire.push_back({n.start_step * kTicksPerStep, 1, 0x90, static_cast<std::uint8_t>(n.pitch),
                    static_cast<std::uint8_t>(n.velocity)});
    wire.push_back({(n.start_step + n.len_steps) * kTicksPerStep, 0, 0x80,
                    static_cast<std::uint8_t>(n.pitch), 0});
  }
  std::sort(wire.begin(), wire.end(), [](const WireEvent& a, const WireEvent& b) {
    if (a.tick != b.tick) return a.tick < b.tick;
    if (a.order != b.order) return a.order < b.order;
    return a.d1 < b.d1;
  });

  std::vector<std::uint8_t> track;
  // tempo 500000 us per quarter (120 BPM)
  midi_detail::append_vlq(track, 0);
  track.insert(track.end(), {0xff, 0x51, 0x03, 0x07, 0xa1, 0x20});
  int last_tick = 0;
  for (const auto& ev : wire) {
    midi_detail::append_vlq(track, static_cast<std::uint32_t>(ev.tick - last_tick));
    last_tick = ev.tick;
    track.insert(track.end(), {ev.status, ev.d1, ev.d2});
  }
  midi_detail::append_vlq(track, 0);
  track.insert(track.end(), {0xff, 0x2f, 0x00});

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd', 0, 0, 0, 6});
  out.insert(out.end(), {0, 0});  // format 0
  out.insert(out.end(), {0, 1});  // one track
  out.push_back(static_cast<std::uint8_t>(kExportTpq >> 8));
  out.push_back(static_cast<std::uint8_t>(kExportTpq & 0xff));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  const std::uint32_t len = static_cast<std::uint32_t>(track.size());
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

inline void export_midi(const PianoRollSequence& seq, const std::string& path) {
  const auto bytes = midi_bytes(seq);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open MIDI file for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to MIDI file: " + path);
}

}  // namespace srvg

#endif  // SRVG_MIDI_HPP
