// Copyright 2026 The accent-toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Argument parsing for the `accent` tool.
//
// Exit codes: 0 success, 1 data error, 2 usage error. A --config JSON file is
// applied first; explicit flags override it.

#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "accent/app.hpp"

namespace accent::cli {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> manifest;
  std::optional<std::string> out;
  std::optional<std::string> feature;
  std::optional<std::string> frames;
  std::optional<std::string> classifier;
  std::optional<std::size_t> repeats;
  std::optional<std::uint64_t> seed;
  std::optional<double> test_fraction;
  bool stratified = false;
  std::optional<std::string> tier;
  std::optional<std::string> inventory;
  std::optional<std::string> embedding_dir;
  std::optional<std::string> aggregate;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> l2;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> patience;
  std::optional<unsigned> jobs;
  bool force = false;
};

inline void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration (flags override it)");
  cmd->add_option("--manifest", f.manifest, "manifest CSV: speaker_id,city,audio_path,alignment_path");
  cmd->add_option("--out", f.out, "output directory (default: out)");
  cmd->add_option("--jobs", f.jobs, "parallel workers (default: available cores)");
  cmd->add_option("--tier", f.tier, "alignment tier name (default: phones)");
  cmd->add_option("--inventory", f.inventory, "vowel inventory CSV (default: built-in)");
  cmd->add_option("--embedding-dir", f.embedding_dir, "directory of <speaker_id>.accemb files");
  cmd->add_option("--aggregate", f.aggregate, "formant slot aggregate: mean|median");
}

inline void add_experiment(CLI::App* cmd, Flags& f) {
  cmd->add_option("--feature", f.feature, "formant|mfcc|embedding");
  cmd->add_option("--classifier", f.classifier, "logreg|mlp|both");
  cmd->add_option("--repeats", f.repeats, "repeated holdout count (default: 100)");
  cmd->add_option("--seed", f.seed, "base seed; repeat i uses seed + i");
  cmd->add_option("--test-fraction", f.test_fraction, "share of speakers held out (default: 0.1)");
  cmd->add_flag("--stratified-negatives", f.stratified, "draw negatives round-robin over cities");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
  cmd->add_option("--l2", f.l2, "L2 penalty");
  cmd->add_option("--hidden", f.hidden, "MLP hidden width");
  cmd->add_option("--patience", f.patience, "early-stop patience in epochs");
}

inline std::vector<ClassifierKind> parse_classifiers(std::string_view s) {
  if (s == "both") return {ClassifierKind::LogReg, ClassifierKind::Mlp};
  return {parse_classifier_kind(s)};
}

/// Builds the RunConfig: defaults, then --config, then explicit flags.
inline app::RunConfig resolve(const Flags& f, bool frames_is_list) {
  app::RunConfig cfg;
  if (f.config) {
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(read_file(*f.config));
    } catch (const nlohmann::json::exception& e) {
      fail<UsageError>("--config ", *f.config, ": ", e.what());
    }
    cfg.merge_json(j);
  }
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.out) cfg.out_dir = *f.out;
  if (f.jobs) cfg.jobs = std::max(1u, *f.jobs);
  if (f.tier) cfg.tier = *f.tier;
  if (f.inventory) cfg.inventory = std::filesystem::path(*f.inventory);
  if (f.embedding_dir) cfg.embedding_dir = *f.embedding_dir;
  if (f.aggregate) cfg.aggregate = app::RunConfig::parse_aggregate(*f.aggregate);
  if (f.feature) {
    cfg.feature = parse_feature_kind(*f.feature);
    if (cfg.feature == FeatureKind::Formant && !f.frames) cfg.n_frames.reset();
  }
  if (f.frames && !frames_is_list) {
    const auto v = app::parse_frame_list(*f.frames);
    if (v.size() != 1) fail<UsageError>("--frames takes a single count here");
    cfg.n_frames = v.front();
  }
  if (f.classifier) cfg.classifiers = parse_classifiers(*f.classifier);
  if (f.repeats) cfg.n_repeats = *f.repeats;
  if (f.seed) cfg.base_seed = *f.seed;
  if (f.test_fraction) cfg.split.test_fraction = *f.test_fraction;
  if (f.stratified) cfg.split.stratified_negatives = true;
  if (f.lr || f.epochs || f.batch_size || f.l2 || f.hidden || f.patience) {
    if (cfg.classifiers.size() != 1 && !cfg.train) {
      fail<UsageError>("training overrides need a single --classifier (defaults differ per classifier)");
    }
    TrainConfig t = cfg.train ? *cfg.train : TrainConfig::defaults_for(cfg.classifiers.front());
    if (f.lr) t.learning_rate = *f.lr;
    if (f.epochs) t.epochs = *f.epochs;
    if (f.batch_size) t.batch_size = *f.batch_size;
    if (f.l2) t.l2 = *f.l2;
    if (f.hidden) t.hidden_size = *f.hidden;
    if (f.patience) t.patience = *f.patience;
    cfg.train = t;
  }
  return cfg;
}

inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Accent classification toolkit: features, classifiers and repeated one-vs-all evaluation"};
  cli.require_subcommand(1);
  Flags f;

  auto* extract = cli.add_subcommand("extract", "build a feature cache");
  std::string extract_kind;
  extract->add_option("kind", extract_kind, "mfcc|formants|import-embeddings")->required();
  extract->add_flag("--force", f.force, "re-extract even when cached");
  add_common(extract, f);

  auto* run = cli.add_subcommand("run", "train and evaluate; write tables, JSON and models");
  add_common(run, f);
  add_experiment(run, f);
  run->add_option("--frames", f.frames, "frames per chunk (mfcc, embedding)");

  auto* sweep = cli.add_subcommand("sweep", "average F1 over a list of chunk lengths");
  add_common(sweep, f);
  add_experiment(sweep, f);
  sweep->add_option("--frames", f.frames, "comma-separated frame counts, ascending")->required();

  auto* rank = cli.add_subcommand("rank", "largest logistic-regression coefficients");
  std::string model_path;
  std::size_t k = 10;
  rank->add_option("--model", model_path, "model JSON written by run")->required();
  rank->add_option("--k", k, "how many (default: 10)");

  auto* synth_cmd = cli.add_subcommand("synth", "write the five-accent synthetic corpus");
  std::string synth_out = "synth";
  std::uint64_t synth_seed = 0;
  synth::SynthConfig scfg;
  bool no_embeddings = false;
  unsigned synth_jobs = default_jobs();
  synth_cmd->add_option("--out", synth_out, "output directory");
  synth_cmd->add_option("--seed", synth_seed, "corpus seed");
  synth_cmd->add_option("--speakers-per-city", scfg.speakers_per_city, "default: 21");
  synth_cmd->add_option("--passage-repeats", scfg.passage_repeats, "passage readings per speaker (default: 2)");
  synth_cmd->add_option("--envelope-jitter-db", scfg.envelope_jitter_db, "per-10 ms spread of the accent envelope (default: 18)");
  synth_cmd->add_option("--jobs", synth_jobs, "parallel workers");
  synth_cmd->add_flag("--no-embeddings", no_embeddings, "skip the ACCEMB01 files");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << cli.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*extract) {
      app::RunConfig cfg = resolve(f, false);
      cfg.force = f.force;
      if (extract_kind == "mfcc") cfg.feature = FeatureKind::Mfcc;
      else if (extract_kind == "formants") cfg.feature = FeatureKind::Formant;
      else if (extract_kind == "import-embeddings") cfg.feature = FeatureKind::Embedding;
      else fail<UsageError>("extract: unknown kind '", extract_kind, "' (expected mfcc|formants|import-embeddings)");
      if (cfg.feature == FeatureKind::Embedding && cfg.embedding_dir.empty()) {
        fail<UsageError>("extract import-embeddings needs --embedding-dir");
      }
      const auto s = app::cmd_extract(cfg);
      for (const auto& e : s.errors) err << "error: " << e << "\n";
      out << s.message() << "\n";
      return s.errors.empty() ? 0 : 1;
    }
    if (*run) {
      const auto r = app::cmd_run(resolve(f, false));
      out << r.stdout_text;
      return 0;
    }
    if (*sweep) {
      app::RunConfig cfg = resolve(f, true);
      const auto frames = app::parse_frame_list(*f.frames);
      const auto r = app::cmd_sweep(cfg, frames);
      out << r.stdout_text;
      return 0;
    }
    if (*rank) {
      out << app::cmd_rank(model_path, k);
      return 0;
    }
    if (*synth_cmd) {
      scfg.write_embeddings = !no_embeddings;
      out << app::cmd_synth(synth_out, synth_seed, scfg, std::max(1u, synth_jobs));
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace accent::cli
