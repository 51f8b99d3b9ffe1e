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
// Command-line front end: ingest | train | generate | eval | export.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "srvg/report.hpp"
#include "srvg/srvg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t pick_seed(const std::optional<std::uint64_t>& requested, std::ostream& out) {
  if (requested.has_value()) return *requested;
  std::random_device rd;
  const std::uint64_t seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  out << "seed not given, using " << seed << " (pass --seed " << seed << " to replay)\n";
  return seed;
}

int cmd_ingest(const std::string& midi_dir, const std::string& out_path) {
  if (!fs::is_directory(midi_dir)) throw srvg::IoError("not a directory: " + midi_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(midi_dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".mid" || ext == ".midi" || ext == ".smf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw srvg::IoError("no MIDI files in " + midi_dir);

  std::vector<srvg::PianoRollSequence> corpus;
  std::size_t total_bars = 0;
  int skipped = 0;
  int dropped_notes = 0;
  for (const auto& file : files) {
    try {
      const srvg::MidiFile midi = srvg::parse_midi_file(file.string());
      srvg::RollStats stats;
      srvg::PianoRollSequence seq = srvg::to_piano_roll(midi, &stats, file.filename().string());
      dropped_notes += stats.dropped_notes;
      std::cout << file.filename().string() << ": " << seq.bars.size() << " bars\n";
      if (!seq.bars.empty()) {
        total_bars += seq.bars.size();
        corpus.push_back(std::move(seq));
      }
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.filename().string() << ": " << e.what() << "\n";
      ++skipped;
    }
  }
  if (corpus.empty()) throw srvg::IoError("no parseable MIDI files in " + midi_dir);
  srvg::save_dataset(corpus, out_path);
  std::cout << "wrote " << corpus.size() << " sequences, " << total_bars << " bars to " << out_path
            << " (skipped " << skipped << " files, dropped " << dropped_notes
            << " out-of-range notes)\n";
  return 0;
}

int cmd_train(srvg::TrainConfig cfg, const std::string& checkpoint_path) {
  if (cfg.dataset_path.empty()) throw srvg::ConfigError("train needs --dataset (or dataset= in config)");
  cfg.validate();
  const auto corpus = srvg::load_dataset(cfg.dataset_path);
  const srvg::PairList pairs = srvg::collect_pairs(corpus);
  std::cout << corpus.size() << " sequences, " << pairs.size() << " sequential pairs\n";

  srvg::Model model = srvg::Model::create({cfg.width}, cfg.seed);
  std::cout << "model width " << cfg.width << ", " << model.state.parameter_count()
            << " parameters\n";

  std::ofstream log;
  srvg::TrainHooks hooks;
  hooks.checkpoint_path = checkpoint_path;
  hooks.progress = &std::cout;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw srvg::IoError("cannot open log: " + cfg.log_path);
    hooks.log = &log;
  }
  srvg::train_loop(model, pairs, cfg, hooks);
  std::cout << "checkpoint written to " << checkpoint_path << "\n";
  return 0;
}

int cmd_generate(const std::string& checkpoint_path, srvg::GenSpec spec,
                 const std::string& dataset_path, std::optional<int> seed_index,
                 const std::string& out_path, const std::string& midi_out) {
  srvg::Model model = srvg::Model::from_state(srvg::load_checkpoint(checkpoint_path));

  if (spec.mode == 1) {
    if (dataset_path.empty())
      throw srvg::ConfigError("mode 1 needs --dataset to pick the seed bar from");
    const auto corpus = srvg::load_dataset(dataset_path);
    std::vector<const srvg::PianoRollBar*> bars;
    for (const auto& seq : corpus)
      for (const auto& bar : seq.bars) bars.push_back(&bar);
    if (bars.empty()) throw srvg::IoError("dataset has no bars to seed from");
    std::size_t index;
    if (seed_index.has_value()) {
      if (*seed_index < 0 || static_cast<std::size_t>(*seed_index) >= bars.size())
        throw srvg::ConfigError("--seed-index out of range, dataset has " +
                                std::to_string(bars.size()) + " bars");
      index = static_cast<std::size_t>(*seed_index);
    } else {
      srvg::Pcg32 rng(srvg::derive_stream(spec.seed, "seed-bar"));
      index = rng.next_below(static_cast<std::uint32_t>(bars.size()));
    }
    spec.seed_bar = *bars[index];
    std::cout << "seed bar index " << index << "\n";
  }

  const srvg::PianoRollSequence seq = srvg::generate_sequence(model, spec);
  for (std::size_t b = 0; b < seq.bars.size(); ++b) {
    int nonzero = 0;
    for (float v : seq.bars[b].values)
      if (v >= srvg::kNoteThreshold) ++nonzero;
    std::cout << "bar " << b << ": " << nonzero << " active cells\n";
  }
  srvg::save_dataset({seq}, out_path);
  std::cout << "wrote " << seq.bars.size() << " bars to " << out_path << "\n";
  if (!midi_out.empty()) {
    srvg::export_midi(seq, midi_out);
    std::cout << "wrote MIDI to " << midi_out << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& in_path, const std::string& out_path) {
  std::vector<srvg::PianoRollSequence> samples;
  if (fs::is_directory(in_path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        samples.push_back(srvg::to_piano_roll(srvg::parse_midi_file(file.string()), nullptr,
                                              file.filename().string()));
      } catch (const std::exception& e) {
        std::cerr << "warning: skipping " << file.filename().string() << ": " << e.what() << "\n";
      }
    }
  } else {
    samples = srvg::load_dataset(in_path);
  }
  if (samples.empty()) throw srvg::IoError("no samples to evaluate");

  const json report = srvg::build_eval_report(samples);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw srvg::IoError("cannot open report for writing: " + out_path);
  out << report.dump(2) << "\n";

  std::cout << samples.size() << " samples evaluated\n";
  std::cout << srvg::render_comparison_table(report);
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

int cmd_export(const std::string& in_path, const std::string& out_dir) {
  const auto corpus = srvg::load_dataset(in_path);
  fs::create_directories(out_dir);
  int i = 0;
  for (const auto& seq : corpus) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%04d.mid", i++);
    srvg::export_midi(seq, (fs::path(out_dir) / name).string());
  }
  std::cout << "wrote " << corpus.size() << " MIDI files to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-recurrent convolutional VAE-GAN for piano-roll music"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "parse a MIDI directory into a dataset file");
  std::string midi_dir, ingest_out;
  ingest->add_option("--midi-dir", midi_dir, "directory of .mid files")->required();
  ingest->add_option("--out", ingest_out, "output dataset path")->required();

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  std::string config_path, train_dataset, checkpoint_out = "model.srvg", train_log;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> epochs, batch_size, width, ckpt_interval;
  std::optional<double> lr_eg, lr_d;
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--dataset", train_dataset, "dataset path (overrides config)");
  train->add_option("--out-checkpoint", checkpoint_out, "checkpoint output path");
  train->add_option("--epochs", epochs);
  train->add_option("--batch-size", batch_size);
  train->add_option("--seed", train_seed);
  train->add_option("--lr-eg", lr_eg);
  train->add_option("--lr-d", lr_d);
  train->add_option("--width", width, "channel width factor (8 = full size)");
  train->add_option("--checkpoint-interval", ckpt_interval);
  train->add_option("--log", train_log, "JSON-lines loss log (overrides config)");

  auto* gen = app.add_subcommand("generate", "generate bars from a checkpoint");
  std::string gen_checkpoint, gen_dataset, gen_out, gen_midi_out;
  int gen_mode = 2, gen_bars = 5;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> seed_index;
  bool include_seed = false, deterministic = false;
  gen->add_option("--checkpoint", gen_checkpoint)->required();
  gen->add_option("--mode", gen_mode, "1: seed from dataset bar; 2: seed from noise")
      ->check(CLI::Range(1, 2));
  gen->add_option("--bars", gen_bars)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--seed-index", seed_index, "mode 1: dataset bar index for the seed");
  gen->add_option("--dataset", gen_dataset, "mode 1: dataset to draw the seed bar from");
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--midi-out", gen_midi_out, "also export the result as MIDI");
  gen->add_flag("--include-seed", include_seed, "mode 1: prepend the seed bar to the output");
  gen->add_flag("--deterministic", deterministic, "chain with z = mu (no sampling)");

  auto* eval = app.add_subcommand("eval", "compute sample metrics and corpus diversity");
  std::string eval_in, eval_out = "report.json";
  eval->add_option("--in", eval_in, "dataset file or directory of MIDI files")->required();
  eval->add_option("--out", eval_out, "JSON report path");

  auto* exp = app.add_subcommand("export", "write each dataset sequence as a MIDI file");
  std::string export_in, export_dir;
  exp->add_option("--in", export_in)->required();
  exp->add_option("--out-dir", export_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(midi_dir, ingest_out);
    if (train->parsed()) {
      srvg::TrainConfig cfg;
      if (!config_path.empty()) cfg = srvg::load_config(config_path);
      if (!train_dataset.empty()) cfg.dataset_path = train_dataset;
      if (!train_log.empty()) cfg.log_path = train_log;
      if (epochs) cfg.epochs = *epochs;
      if (batch_size) cfg.batch_size = *batch_size;
      if (lr_eg) cfg.lr_eg = *lr_eg;
      if (lr_d) cfg.lr_d = *lr_d;
      if (width) cfg.width = *width;
      if (ckpt_interval) cfg.checkpoint_interval = *ckpt_interval;
      cfg.seed = pick_seed(train_seed, std::cout);
      return cmd_train(cfg, checkpoint_out);
    }
    if (gen->parsed()) {
      srvg::GenSpec spec;
      spec.mode = gen_mode;
      spec.n_bars = gen_bars;
      spec.seed = pick_seed(gen_seed, std::cout);
      spec.include_seed = include_seed;
      spec.deterministic = deterministic;
      return cmd_generate(gen_checkpoint, spec, gen_dataset, seed_index, gen_out, gen_midi_out);
    }
    if (eval->parsed()) return cmd_eval(eval_in, eval_out);
    if (exp->parsed()) return cmd_export(export_in, export_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
