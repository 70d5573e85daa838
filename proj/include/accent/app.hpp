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

// Command layer behind the `accent` tool: run configuration, the
// content-addressed feature cache, and the extract/run/sweep/rank/synth
// commands. Commands write files and return what they printed so tests can
// drive them without a subprocess.

#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "accent/corpus.hpp"
#include "accent/dsp.hpp"
#include "accent/error.hpp"
#include "accent/features.hpp"
#include "accent/harness.hpp"
#include "accent/inventory.hpp"
#include "accent/models.hpp"
#include "accent/synth.hpp"
#include "accent/util.hpp"

namespace accent::app {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// RunConfig

struct RunConfig {
  fs::path manifest;
  FeatureKind feature = FeatureKind::Mfcc;
  MfccConfig mfcc;
  FormantConfig formant;
  SlotAggregate aggregate = SlotAggregate::Mean;
  std::string tier = "phones";
  std::optional<fs::path> inventory;  // CSV; default inventory when absent
  fs::path embedding_dir;             // import-embeddings source
  std::optional<std::size_t> n_frames;
  std::vector<ClassifierKind> classifiers = {ClassifierKind::LogReg};
  std::optional<TrainConfig> train;  // per-classifier defaults when absent
  std::size_t n_repeats = 100;
  std::uint64_t base_seed = 0;
  SplitOptions split;
  fs::path out_dir = "out";
  unsigned jobs = default_jobs();  // not part of any digest
  bool force = false;              // not part of any digest

  /// Exactly one feature kind; frames required for chunked kinds and absent
  /// for formants.
  void validate() const {
    if (feature == FeatureKind::Formant) {
      if (n_frames) fail<UsageError>("--frames does not apply to formant features");
    } else {
      if (!n_frames) fail<UsageError>("--frames is required for ", to_string(feature), " features");
      if (*n_frames < 1) fail<UsageError>("--frames must be >= 1");
    }
    if (classifiers.empty()) fail<UsageError>("no classifier selected");
    if (n_repeats < 1) fail<UsageError>("--repeats must be >= 1");
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
      fail<UsageError>("--test-fraction must lie in (0, 1)");
    }
    if (train) train->validate();
  }

  TrainConfig train_for(ClassifierKind k) const {
    TrainConfig t = train ? *train : TrainConfig::defaults_for(k);
    t.seed = base_seed;
    return t;
  }

  /// Everything that shapes extraction for the active feature kind.
  ordered_json extract_json() const {
    ordered_json j;
    j["feature"] = to_string(feature);
    switch (feature) {
      case FeatureKind::Mfcc: j["mfcc"] = mfcc.to_json(); break;
      case FeatureKind::Formant:
        j["formant"] = formant.to_json();
        j["aggregate"] = aggregate == SlotAggregate::Mean ? "mean" : "median";
        j["tier"] = tier;
        j["inventory"] = inventory_csv();
        break;
      case FeatureKind::Embedding: j["container"] = "ACCEMB01"; break;
    }
    return j;
  }

  std::string extract_digest() const { return sha256_hex(extract_json().dump()); }

  std::string inventory_csv() const {
    return inventory ? read_file(*inventory) : VowelInventory::default_inventory().to_csv();
  }

  VowelInventory load_inventory() const {
    return inventory ? VowelInventory::from_csv(read_file(*inventory)) : VowelInventory::default_inventory();
  }

  ordered_json to_json() const {
    ordered_json j;
    j["manifest"] = manifest.generic_string();
    j["feature"] = to_string(feature);
    j["mfcc"] = mfcc.to_json();
    j["formant"] = formant.to_json();
    j["aggregate"] = aggregate == SlotAggregate::Mean ? "mean" : "median";
    j["tier"] = tier;
    j["inventory"] = inventory ? ordered_json(inventory->generic_string()) : ordered_json(nullptr);
    j["embedding_dir"] = embedding_dir.generic_string();
    j["n_frames"] = n_frames ? ordered_json(*n_frames) : ordered_json(nullptr);
    j["classifiers"] = ordered_json::array();
    for (auto k : classifiers) j["classifiers"].push_back(to_string(k));
    j["train"] = train ? train->to_json() : ordered_json(nullptr);
    j["n_repeats"] = n_repeats;
    j["base_seed"] = base_seed;
    j["test_fraction"] = split.test_fraction;
    j["stratified_negatives"] = split.stratified_negatives;
    j["out_dir"] = out_dir.generic_string();
    return j;
  }

  /// Digest of the fields that determine report contents.
  std::string digest() const {
    ordered_json j = to_json();
    j.erase("out_dir");
    return sha256_hex(j.dump());
  }

  /// Applies keys present in `j`; unknown keys are a usage error.
  void merge_json(const ordered_json& j) {
    if (!j.is_object()) fail<UsageError>("config: expected a JSON object");
    try {
      for (const auto& [key, v] : j.items()) {
        if (key == "manifest") manifest = v.get<std::string>();
        else if (key == "feature") feature = parse_feature_kind(v.get<std::string>());
        else if (key == "mfcc") merge_mfcc(v);
        else if (key == "formant") merge_formant(v);
        else if (key == "aggregate") aggregate = parse_aggregate(v.get<std::string>());
        else if (key == "tier") tier = v.get<std::string>();
        else if (key == "inventory") inventory = v.is_null() ? std::nullopt : std::optional<fs::path>(v.get<std::string>());
        else if (key == "embedding_dir") embedding_dir = v.get<std::string>();
        else if (key == "n_frames") n_frames = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
        else if (key == "classifiers") {
          classifiers.clear();
          for (const auto& c : v) classifiers.push_back(parse_classifier_kind(c.get<std::string>()));
        } else if (key == "train") {
          if (v.is_null()) {
            train.reset();
          } else {
            TrainConfig t = train ? *train : TrainConfig::logreg_defaults();
            merge_train(t, v);
            train = t;
          }
        } else if (key == "n_repeats") n_repeats = v.get<std::size_t>();
        else if (key == "base_seed") base_seed = v.get<std::uint64_t>();
        else if (key == "test_fraction") split.test_fraction = v.get<double>();
        else if (key == "stratified_negatives") split.stratified_negatives = v.get<bool>();
        else if (key == "out_dir") out_dir = v.get<std::string>();
        else if (key == "digest") continue;
        else fail<UsageError>("config: unknown key '", key, "'");
      }
    } catch (const nlohmann::json::exception& e) {
      fail<UsageError>("config: ", e.what());
    }
  }

  static SlotAggregate parse_aggregate(std::string_view s) {
    if (s == "mean") return SlotAggregate::Mean;
    if (s == "median") return SlotAggregate::Median;
    fail<UsageError>("unknown aggregate '", s, "' (expected mean or median)");
  }

 private:
  void merge_mfcc(const ordered_json& v) {
    if (v.contains("frame_length")) mfcc.frame_length = v["frame_length"].get<double>();
    if (v.contains("hop")) mfcc.hop = v["hop"].get<double>();
    if (v.contains("n_fft")) mfcc.n_fft = v["n_fft"].get<std::size_t>();
    if (v.contains("n_filters")) mfcc.n_filters = v["n_filters"].get<int>();
    if (v.contains("n_coeffs")) mfcc.n_coeffs = v["n_coeffs"].get<int>();
    if (v.contains("f_min")) mfcc.f_min = v["f_min"].get<double>();
    if (v.contains("f_max")) mfcc.f_max = v["f_max"].get<double>();
    if (v.contains("preemphasis")) mfcc.preemphasis = v["preemphasis"].get<double>();
    if (v.contains("log_floor")) mfcc.log_floor = v["log_floor"].get<double>();
  }
  void merge_formant(const ordered_json& v) {
    if (v.contains("window")) formant.window = v["window"].get<double>();
    if (v.contains("lpc_order")) formant.lpc_order = v["lpc_order"].get<int>();
    if (v.contains("max_formant")) formant.max_formant = v["max_formant"].get<double>();
    if (v.contains("preemphasis_from")) formant.preemphasis_from = v["preemphasis_from"].get<double>();
    if (v.contains("max_bandwidth")) formant.max_bandwidth = v["max_bandwidth"].get<double>();
    if (v.contains("min_frequency")) formant.min_frequency = v["min_frequency"].get<double>();
  }
  static void merge_train(TrainConfig& t, const ordered_json& v) {
    if (v.contains("learning_rate")) t.learning_rate = v["learning_rate"].get<double>();
    if (v.contains("epochs")) t.epochs = v["epochs"].get<std::size_t>();
    if (v.contains("batch_size")) t.batch_size = v["batch_size"].get<std::size_t>();
    if (v.contains("l2")) t.l2 = v["l2"].get<double>();
    if (v.contains("hidden_size")) t.hidden_size = v["hidden_size"].get<std::size_t>();
    if (v.contains("patience")) {
      t.patience = v["patience"].is_null() ? std::nullopt : std::optional<std::size_t>(v["patience"].get<std::size_t>());
    }
  }
};

// ---------------------------------------------------------------------------
// Feature cache
//
// out/cache/<feature>/index.json lists one entry per recording. An entry's key
// is sha256(extract digest, input file digests); the cached file name embeds
// the key, so a changed input or configuration can never be mistaken for an
// up-to-date one.

struct CacheEntry {
  std::string speaker_id;
  std::string city;
  std::string key;
  std::string file;  // relative to the cache dir
};

struct CacheIndex {
  std::string feature;
  std::string extract_digest;
  ordered_json extract_config;
  std::vector<CacheEntry> entries;
  std::string source_dir;  // embedding import directory; empty otherwise

  ordered_json to_json() const {
    ordered_json j;
    j["feature"] = feature;
    j["extract_digest"] = extract_digest;
    j["extract_config"] = extract_config;
    if (!source_dir.empty()) j["source_dir"] = source_dir;
    j["entries"] = ordered_json::array();
    for (const auto& e : entries) {
      j["entries"].push_back({{"speaker_id", e.speaker_id}, {"city", e.city}, {"key", e.key}, {"file", e.file}});
    }
    return j;
  }

  static CacheIndex from_json(const ordered_json& j) {
    CacheIndex idx;
    idx.feature = j.at("feature").get<std::string>();
    idx.extract_digest = j.at("extract_digest").get<std::string>();
    idx.extract_config = j.at("extract_config");
    if (j.contains("source_dir")) idx.source_dir = j["source_dir"].get<std::string>();
    for (const auto& e : j.at("entries")) {
      idx.entries.push_back({e.at("speaker_id").get<std::string>(), e.at("city").get<std::string>(),
                             e.at("key").get<std::string>(), e.at("file").get<std::string>()});
    }
    return idx;
  }

  /// Digest of the cached corpus as a whole (ordered entry keys).
  std::string corpus_digest() const {
    std::string all = extract_digest;
    for (const auto& e : entries) all += "\n" + e.speaker_id + ":" + e.key;
    return sha256_hex(all);
  }
};

inline fs::path cache_dir(const RunConfig& cfg) {
  return cfg.out_dir / "cache" / std::string(to_string(cfg.feature));
}

inline fs::path embedding_source(const RunConfig& cfg, const Recording& rec) {
  for (const char* ext : {".accemb", ".emb", ".bin"}) {
    fs::path p = cfg.embedding_dir / (rec.speaker_id + ext);
    if (fs::exists(p)) return p;
  }
  return cfg.embedding_dir / (rec.speaker_id + ".accemb");
}

/// The content key for one recording under the current configuration.
inline std::string entry_key(const RunConfig& cfg, const Recording& rec, const std::string& extract_digest) {
  std::string material = extract_digest;
  switch (cfg.feature) {
    case FeatureKind::Mfcc: material += sha256_hex(read_file(rec.audio_path)); break;
    case FeatureKind::Formant:
      if (!rec.alignment_path) fail("recording ", rec.speaker_id, ": no alignment_path (required for formants)");
      material += sha256_hex(read_file(rec.audio_path));
      material += sha256_hex(read_file(*rec.alignment_path));
      break;
    case FeatureKind::Embedding: {
      const fs::path src = embedding_source(cfg, rec);
      if (!fs::exists(src)) fail("recording ", rec.speaker_id, ": embedding file not found: ", src.string());
      material += sha256_hex(read_file(src));
      break;
    }
  }
  material += rec.speaker_id + "\n" + rec.city.to_string();
  return sha256_hex(material);
}

inline std::string formant_to_json(const FormantSpeakerVector& v) {
  ordered_json j;
  j["speaker_id"] = v.speaker_id;
  j["city"] = v.city.to_string();
  j["values"] = v.values;
  j["coverage"] = v.coverage;
  j["skipped_tokens"] = v.skipped_tokens;
  return j.dump();
}

inline FormantSpeakerVector formant_from_json(std::string_view text, const std::string& name) {
  try {
    const auto j = ordered_json::parse(text);
    FormantSpeakerVector v;
    v.speaker_id = j.at("speaker_id").get<std::string>();
    v.city = CityLabel::parse(j.at("city").get<std::string>());
    v.values = j.at("values").get<std::vector<double>>();
    v.coverage = j.at("coverage").get<std::vector<std::size_t>>();
    v.skipped_tokens = j.at("skipped_tokens").get<std::size_t>();
    return v;
  } catch (const nlohmann::json::exception& e) {
    fail("formant cache ", name, ": ", e.what());
  }
}

/// Computes and writes the cached feature file for one recording.
inline void extract_one(const RunConfig& cfg, const VowelInventory& inv, const Recording& rec,
                        const fs::path& out) {
  switch (cfg.feature) {
    case FeatureKind::Mfcc: {
      FeatureMatrix m = mfcc(read_wav(rec.audio_path), cfg.mfcc);
      m.speaker_id = rec.speaker_id;
      m.city = rec.city;
      m.metadata["model_id"] = "mfcc";
      m.metadata["layer"] = nullptr;
      write_embedding_file(m, out);
      break;
    }
    case FeatureKind::Formant: {
      const AudioBuffer audio = read_wav(rec.audio_path);
      const AlignmentTier tier = read_alignment(*rec.alignment_path, cfg.tier, inv);
      const auto v = build_formant_vector(rec, audio, tier, inv, cfg.formant, cfg.aggregate);
      write_file_atomic(out, formant_to_json(v));
      break;
    }
    case FeatureKind::Embedding: {
      const fs::path src = embedding_source(cfg, rec);
      FeatureMatrix m = read_embedding_file(src);
      if (m.speaker_id != rec.speaker_id) {
        fail(src.string(), ": header speaker_id '", m.speaker_id, "' does not match manifest '", rec.speaker_id, "'");
      }
      if (!(m.city == rec.city)) {
        fail(src.string(), ": header city '", m.city.to_string(), "' does not match manifest '",
             rec.city.to_string(), "'");
      }
      write_embedding_file(m, out);
      break;
    }
  }
}

struct ExtractSummary {
  std::size_t extracted = 0;
  std::size_t cached = 0;
  std::vector<std::string> errors;
  std::string message() const {
    return std::to_string(extracted) + " extracted, " + std::to_string(cached) + " cached" +
           (errors.empty() ? "" : ", " + std::to_string(errors.size()) + " failed");
  }
};

inline Corpus load_corpus(const RunConfig& cfg) {
  if (cfg.manifest.empty()) fail<UsageError>("--manifest is required");
  return load_manifest(cfg.manifest);
}

/// Idempotent: recordings whose key file already exists are skipped unless
/// `force`. Per-file failures are collected; the index lists successes only.
inline ExtractSummary cmd_extract(const RunConfig& cfg) {
  const Corpus corpus = load_corpus(cfg);
  const VowelInventory inv = cfg.load_inventory();
  const fs::path dir = cache_dir(cfg);
  fs::create_directories(dir);
  const std::string digest = cfg.extract_digest();
  const std::string ext = cfg.feature == FeatureKind::Formant ? ".json" : ".accemb";

  struct Outcome {
    std::optional<CacheEntry> entry;
    bool cached = false;
    std::string error;
  };
  std::vector<Outcome> outcomes(corpus.recordings.size());
  parallel_for(corpus.recordings.size(), cfg.jobs, [&](std::size_t i) {
    const Recording& rec = corpus.recordings[i];
    Outcome& o = outcomes[i];
    try {
      const std::string key = entry_key(cfg, rec, digest);
      CacheEntry e{rec.speaker_id, rec.city.to_string(), key, rec.speaker_id + "." + key.substr(0, 16) + ext};
      if (!cfg.force && fs::exists(dir / e.file)) {
        o.cached = true;
      } else {
        extract_one(cfg, inv, rec, dir / e.file);
      }
      o.entry = e;
    } catch (const std::exception& ex) {
      o.error = rec.speaker_id + ": " + ex.what();
    }
  });

  ExtractSummary s;
  CacheIndex index{std::string(to_string(cfg.feature)), digest, cfg.extract_json(), {}, {}};
  if (cfg.feature == FeatureKind::Embedding) index.source_dir = fs::absolute(cfg.embedding_dir).generic_string();
  for (const auto& o : outcomes) {
    if (!o.error.empty()) {
      s.errors.push_back(o.error);
      continue;
    }
    index.entries.push_back(*o.entry);
    (o.cached ? s.cached : s.extracted) += 1;
  }
  write_file_atomic(dir / "index.json", index.to_json().dump(2) + "\n");
  return s;
}

/// Loads the cache index and checks it against the current configuration
/// and the current input files.
inline CacheIndex load_cache(const RunConfig& cfg, const Corpus& corpus) {
  const fs::path dir = cache_dir(cfg);
  const fs::path index_path = dir / "index.json";
  if (!fs::exists(index_path)) {
    fail("no ", to_string(cfg.feature), " feature cache at ", dir.string(), "; run `accent extract ",
         cfg.feature == FeatureKind::Formant ? "formants" : cfg.feature == FeatureKind::Mfcc ? "mfcc" : "import-embeddings",
         "` first");
  }
  CacheIndex index;
  try {
    index = CacheIndex::from_json(ordered_json::parse(read_file(index_path)));
  } catch (const nlohmann::json::exception& e) {
    fail(index_path.string(), ": ", e.what());
  }
  const std::string digest = cfg.extract_digest();
  if (index.extract_digest != digest) {
    fail("stale feature cache: ", index_path.string(), " was built with extract digest ",
         index.extract_digest.substr(0, 12), " but the current configuration has ", digest.substr(0, 12),
         "; re-run extract");
  }
  // Without --embedding-dir, embeddings are checked against the import directory.
  RunConfig effective = cfg;
  if (effective.embedding_dir.empty()) effective.embedding_dir = index.source_dir;
  std::map<std::string, const CacheEntry*> by_id;
  for (const auto& e : index.entries) by_id[e.speaker_id] = &e;
  std::string missing;
  for (const auto& rec : corpus.recordings) {
    auto it = by_id.find(rec.speaker_id);
    if (it == by_id.end()) {
      missing += (missing.empty() ? "" : ", ") + rec.speaker_id;
      continue;
    }
    if (it->second->key != entry_key(effective, rec, digest)) {
      fail("stale feature cache: inputs for ", rec.speaker_id, " changed since extraction; re-run extract");
    }
  }
  if (!missing.empty()) fail("feature cache lacks recording(s): ", missing);
  return index;
}

// ---------------------------------------------------------------------------
// run / sweep

inline std::vector<std::string> chunk_feature_names(FeatureKind kind, std::size_t n_frames, std::size_t dim) {
  std::vector<std::string> names;
  names.reserve(n_frames * dim);
  const char* tag = kind == FeatureKind::Mfcc ? "c" : "d";
  for (std::size_t t = 0; t < n_frames; ++t) {
    for (std::size_t d = 0; d < dim; ++d) {
      names.push_back("t" + std::to_string(t) + "_" + tag + std::to_string(kind == FeatureKind::Mfcc ? d + 1 : d));
    }
  }
  return names;
}

/// Cached matrices for chunked kinds, in manifest order.
inline std::vector<FeatureMatrix> load_matrices(const RunConfig& cfg, const Corpus& corpus, const CacheIndex& index) {
  std::map<std::string, const CacheEntry*> by_id;
  for (const auto& e : index.entries) by_id[e.speaker_id] = &e;
  std::vector<FeatureMatrix> out(corpus.recordings.size());
  const fs::path dir = cache_dir(cfg);
  parallel_for(out.size(), cfg.jobs, [&](std::size_t i) {
    const auto& rec = corpus.recordings[i];
    out[i] = read_embedding_file(dir / by_id.at(rec.speaker_id)->file);
    out[i].speaker_id = rec.speaker_id;
    out[i].city = rec.city;
  });
  return out;
}

inline std::vector<FormantSpeakerVector> load_formants(const RunConfig& cfg, const Corpus& corpus,
                                                       const CacheIndex& index) {
  std::map<std::string, const CacheEntry*> by_id;
  for (const auto& e : index.entries) by_id[e.speaker_id] = &e;
  std::vector<FormantSpeakerVector> out;
  const fs::path dir = cache_dir(cfg);
  for (const auto& rec : corpus.recordings) {
    const fs::path p = dir / by_id.at(rec.speaker_id)->file;
    out.push_back(formant_from_json(read_file(p), p.string()));
    out.back().city = rec.city;
  }
  return out;
}

inline std::string output_stem(const RunConfig& cfg) {
  std::string s(to_string(cfg.feature));
  if (cfg.n_frames) s += "-" + std::to_string(*cfg.n_frames);
  return s;
}

inline ExperimentOptions experiment_options(const RunConfig& cfg, const CacheIndex& index,
                                            std::vector<std::string> feature_names) {
  ExperimentOptions o;
  o.repeats.split = cfg.split;
  o.repeats.n_repeats = cfg.n_repeats;
  o.repeats.base_seed = cfg.base_seed;
  o.repeats.jobs = cfg.jobs;
  o.repeats.keep_first_model = true;
  o.repeats.feature_names = std::move(feature_names);
  o.extra_config["extract"] = index.extract_config;
  o.extra_config["extract_digest"] = index.extract_digest;
  o.extra_config["corpus_digest"] = index.corpus_digest();
  return o;
}

struct RunOutput {
  std::vector<EvalReport> reports;
  std::string stdout_text;
  std::vector<fs::path> files;
};

inline void write_models(const RunConfig& cfg, const EvalReport& report, std::vector<fs::path>& files) {
  const fs::path dir = cfg.out_dir / "models";
  fs::create_directories(dir);
  for (const auto& c : report.cities) {
    if (!c.first_model) continue;
    fs::path p = dir / (output_stem(cfg) + "." + c.city.to_string() + "." + std::string(to_string(c.classifier)) + ".json");
    save_model(*c.first_model, p);
    files.push_back(p);
  }
}

/// Trains and evaluates every selected classifier; writes <stem>.md (city and
/// summary tables), <stem>.<classifier>.json, <stem>.config.json and repeat-0
/// models.
inline RunOutput cmd_run(const RunConfig& cfg) {
  cfg.validate();
  const Corpus corpus = load_corpus(cfg);
  const CacheIndex index = load_cache(cfg, corpus);
  SampleSet samples;
  std::vector<std::string> names;
  if (cfg.feature == FeatureKind::Formant) {
    samples = formant_samples(load_formants(cfg, corpus, index));
    names = cfg.load_inventory().slot_names();
  } else {
    const auto mats = load_matrices(cfg, corpus, index);
    samples = segment_all(mats, *cfg.n_frames, cfg.feature);
    if (samples.samples.empty()) fail("no recording is long enough for ", *cfg.n_frames, "-frame chunks");
    names = chunk_feature_names(cfg.feature, *cfg.n_frames, mats.front().cols);
  }
  const ExperimentOptions opts = experiment_options(cfg, index, names);

  RunOutput out;
  fs::create_directories(cfg.out_dir);
  const std::string stem = output_stem(cfg);
  for (ClassifierKind k : cfg.classifiers) {
    const ExperimentSetup setup{cfg.feature, cfg.n_frames.value_or(1), k};
    out.reports.push_back(run_experiment(samples, setup, cfg.train_for(k), opts));
    const EvalReport& r = out.reports.back();
    const fs::path jp = cfg.out_dir / (stem + "." + std::string(to_string(k)) + ".json");
    write_file_atomic(jp, report_json(r));
    out.files.push_back(jp);
    write_models(cfg, r, out.files);
    out.stdout_text += summary_line(r) + "\n";
  }
  const EvalReport* lr = nullptr;
  const EvalReport* mlp = nullptr;
  std::vector<const EvalReport*> all;
  for (const auto& r : out.reports) {
    (r.setup.classifier == ClassifierKind::LogReg ? lr : mlp) = &r;
    all.push_back(&r);
  }
  const fs::path md = cfg.out_dir / (stem + ".md");
  write_file_atomic(md, render_city_table(lr, mlp) + "\n" + render_summary_table(all));
  out.files.push_back(md);
  ordered_json rc = cfg.to_json();
  rc["digest"] = cfg.digest();
  const fs::path cp = cfg.out_dir / (stem + ".config.json");
  write_file_atomic(cp, rc.dump(2) + "\n");
  out.files.push_back(cp);
  return out;
}

/// Parses "15,100,200".
inline std::vector<std::size_t> parse_frame_list(std::string_view s) {
  std::vector<std::size_t> out;
  for (const auto& tok : split_csv_line(s)) {
    const std::string t(trim(tok));
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
      fail<UsageError>("frame list: '", t, "' is not a positive integer");
    }
    out.push_back(std::stoul(t));
  }
  if (out.empty()) fail<UsageError>("frame list is empty");
  return out;
}

/// Writes sweep-<feature>-<classifier>.csv, a JSON summary and a summary
/// table over every point.
inline RunOutput cmd_sweep(RunConfig cfg, const std::vector<std::size_t>& frames) {
  if (cfg.feature == FeatureKind::Formant) fail<UsageError>("sweep: formant features are not chunked");
  if (frames.empty()) fail<UsageError>("sweep: frame list is empty");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i] <= frames[i - 1]) fail<UsageError>("sweep: frame list must be ascending");
  }
  cfg.n_frames = frames.front();
  cfg.validate();
  const Corpus corpus = load_corpus(cfg);
  const CacheIndex index = load_cache(cfg, corpus);
  const auto mats = load_matrices(cfg, corpus, index);
  RunOutput out;
  fs::create_directories(cfg.out_dir);
  for (ClassifierKind k : cfg.classifiers) {
    const ExperimentOptions opts = experiment_options(cfg, index, {});
    const SweepReport sw = frame_sweep(mats, cfg.feature, frames, k, cfg.train_for(k), opts);
    const std::string stem = "sweep-" + std::string(to_string(cfg.feature)) + "-" + std::string(to_string(k));
    const fs::path csv = cfg.out_dir / (stem + ".csv");
    write_file_atomic(csv, sw.to_csv());
    out.files.push_back(csv);
    ordered_json j;
    j["feature"] = to_string(cfg.feature);
    j["classifier"] = to_string(k);
    j["points"] = ordered_json::array();
    std::vector<const EvalReport*> all;
    for (std::size_t i = 0; i < sw.points.size(); ++i) {
      const auto& r = sw.reports[i];
      j["points"].push_back({{"n_frames", sw.points[i].n_frames},
                             {"average_f1", sw.points[i].average_f1},
                             {"std", sw.points[i].std},
                             {"digest", r.digest}});
      all.push_back(&r);
      out.stdout_text += summary_line(r) + "\n";
    }
    const fs::path jp = cfg.out_dir / (stem + ".json");
    write_file_atomic(jp, j.dump(2) + "\n");
    const fs::path md = cfg.out_dir / (stem + ".md");
    write_file_atomic(md, render_summary_table(all));
    out.files.push_back(jp);
    out.files.push_back(md);
    out.reports.insert(out.reports.end(), sw.reports.begin(), sw.reports.end());
  }
  return out;
}

/// "rank,index,name,magnitude" lines, largest |coefficient| first.
inline std::string cmd_rank(const fs::path& model_path, std::size_t k) {
  const AnyModel model = load_model(model_path);
  const auto* lr = std::get_if<LogRegModel>(&model);
  if (!lr) fail<UsageError>("rank: ", model_path.string(), " is not a logistic-regression model");
  const auto ranked = rank_coefficients(*lr, lr->feature_names, k);
  std::string out = "rank,index,name,magnitude\n";
  char buf[64];
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", ranked[i].magnitude);
    out += std::to_string(i + 1) + "," + std::to_string(ranked[i].index) + "," + csv_escape(ranked[i].name) + "," +
           buf + "\n";
  }
  return out;
}

inline std::string cmd_synth(const fs::path& out_dir, std::uint64_t seed, const synth::SynthConfig& scfg,
                             unsigned jobs) {
  const auto s = synth::generate_corpus(out_dir, seed, scfg, jobs);
  char buf[160];
  std::snprintf(buf, sizeof buf, "wrote %zu speakers (%.1f s of audio) to %s\n", s.n_speakers, s.total_seconds,
                s.manifest.generic_string().c_str());
  return buf;
}

}  // namespace accent::app
