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

// One-vs-all evaluation: speaker-disjoint holdout splits with balanced
// undersampling, repeated seeded training, P/R/F1 aggregation, frame sweeps
// and table rendering.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "accent/corpus.hpp"
#include "accent/error.hpp"
#include "accent/features.hpp"
#include "accent/models.hpp"
#include "accent/util.hpp"
#include "json.hpp"

namespace accent {

// ---------------------------------------------------------------------------
// Splits

struct SplitOptions {
  double test_fraction = 0.1;
  bool stratified_negatives = false;  // equal quotas per non-target city
};

struct OvaSplit {
  CityLabel target;
  std::uint64_t seed = 0;
  std::vector<std::string> test_speakers;
  std::vector<std::string> train_speakers;
  std::vector<std::size_t> train_positive;  // sample indices
  std::vector<std::size_t> train_negative;
  std::vector<std::size_t> test;
};

/// Speaker-level holdout for one target city. ceil(test_fraction * speakers)
/// speakers (at least one target and one non-target) form the test set; all
/// remaining target chunks are positives and an equal number of non-target
/// chunks is drawn without replacement as negatives.
inline OvaSplit make_ova_split(const SampleSet& samples, const CityLabel& target, std::uint64_t seed,
                               const SplitOptions& opts = {}) {
  if (!(opts.test_fraction > 0.0 && opts.test_fraction < 1.0)) {
    fail<UsageError>("split: test fraction must be in (0, 1)");
  }
  // Speakers in order of first appearance.
  std::vector<std::string> speakers;
  std::map<std::string, CityLabel> city_of;
  std::map<std::string, std::vector<std::size_t>> chunks_of;
  for (std::size_t i = 0; i < samples.samples.size(); ++i) {
    const auto& s = samples.samples[i];
    auto [it, inserted] = city_of.emplace(s.speaker_id, s.city);
    if (inserted) {
      speakers.push_back(s.speaker_id);
    } else if (!(it->second == s.city)) {
      fail("split: speaker ", s.speaker_id, " appears under two cities");
    }
    chunks_of[s.speaker_id].push_back(i);
  }
  std::vector<std::string> targets, others;
  for (const auto& sp : speakers) (city_of[sp] == target ? targets : others).push_back(sp);
  if (targets.empty()) fail("split: city ", target.to_string(), " has zero chunks");
  if (targets.size() < 2 || others.size() < 2) {
    fail("split: too few speakers for ", target.to_string(), " (", targets.size(), " target, ",
         others.size(), " other; need at least 2 of each)");
  }
  const std::size_t n = speakers.size();
  std::size_t n_test = static_cast<std::size_t>(std::ceil(opts.test_fraction * n - 1e-9));
  n_test = std::max<std::size_t>(n_test, 2);
  if (n_test > n - 2) fail("split: test fraction leaves no training speakers");

  Rng rng(seed);
  std::set<std::string> test;
  const std::string t0 = targets[rng.below(targets.size())];
  const std::string o0 = others[rng.below(others.size())];
  test.insert(t0);
  test.insert(o0);
  std::vector<std::string> pool;
  for (const auto& sp : speakers) {
    if (!test.count(sp)) pool.push_back(sp);
  }
  rng.shuffle(pool);
  std::size_t train_targets = targets.size() - 1, train_others = others.size() - 1;
  for (const auto& sp : pool) {
    if (test.size() >= n_test) break;
    const bool is_target = city_of[sp] == target;
    // Keep at least one speaker of each class for training.
    if (is_target ? train_targets == 1 : train_others == 1) continue;
    test.insert(sp);
    (is_target ? train_targets : train_others)--;
  }
  if (test.size() < n_test) fail("split: cannot place ", n_test, " test speakers");

  OvaSplit split;
  split.target = target;
  split.seed = seed;
  std::vector<std::size_t> negatives;
  std::map<CityLabel, std::vector<std::size_t>> negatives_by_city;
  for (const auto& sp : speakers) {
    const auto& idx = chunks_of[sp];
    if (test.count(sp)) {
      split.test_speakers.push_back(sp);
      split.test.insert(split.test.end(), idx.begin(), idx.end());
    } else {
      split.train_speakers.push_back(sp);
      if (city_of[sp] == target) {
        split.train_positive.insert(split.train_positive.end(), idx.begin(), idx.end());
      } else {
        negatives.insert(negatives.end(), idx.begin(), idx.end());
        auto& bucket = negatives_by_city[city_of[sp]];
        bucket.insert(bucket.end(), idx.begin(), idx.end());
      }
    }
  }
  // Balance: undersample the larger side to the smaller one.
  std::size_t k = std::min(split.train_positive.size(), negatives.size());
  if (split.train_positive.size() > k) {
    auto pos = split.train_positive;
    rng.shuffle(pos);
    pos.resize(k);
    std::sort(pos.begin(), pos.end());
    split.train_positive = std::move(pos);
  }
  if (!opts.stratified_negatives) {
    // Partial Fisher-Yates: the first k entries become the draw.
    for (std::size_t i = 0; i < k; ++i) std::swap(negatives[i], negatives[i + rng.below(negatives.size() - i)]);
    negatives.resize(k);
  } else {
    std::vector<std::vector<std::size_t>> buckets;
    for (auto& [city, idx] : negatives_by_city) {
      rng.shuffle(idx);
      buckets.push_back(idx);
    }
    std::vector<std::size_t> order(buckets.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::size_t> taken(buckets.size(), 0), drawn;
    while (drawn.size() < k) {
      for (std::size_t b : order) {
        if (drawn.size() >= k) break;
        if (taken[b] < buckets[b].size()) drawn.push_back(buckets[b][taken[b]++]);
      }
    }
    negatives = std::move(drawn);
  }
  std::sort(negatives.begin(), negatives.end());
  split.train_negative = std::move(negatives);
  return split;
}

// ---------------------------------------------------------------------------
// Metrics

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;  // percentages
};

/// P, R and F1 in percent; every 0/0 is 0.
inline Prf compute_prf(const Confusion& c) {
  Prf r;
  r.precision = c.tp + c.fp ? 100.0 * c.tp / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? 100.0 * c.tp / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

struct MeanStd {
  double mean = 0.0, std = 0.0;
};

/// Mean and population standard deviation.
inline MeanStd mean_std(std::span<const double> v) {
  if (v.empty()) return {};
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

// ---------------------------------------------------------------------------
// Repeats

struct RepeatRecord {
  std::uint64_t seed = 0;
  Confusion chunk;
  Confusion speaker;  // majority vote per test speaker
  Prf chunk_prf;
  Prf speaker_prf;
  std::size_t n_train = 0;
};

struct CityResult {
  CityLabel city;
  ClassifierKind classifier = ClassifierKind::LogReg;
  std::vector<RepeatRecord> repeats;
  std::vector<double> precision, recall, f1;  // chunk level, per repeat
  MeanStd precision_stat, recall_stat, f1_stat;
  MeanStd speaker_f1_stat;
  std::optional<AnyModel> first_model;  // repeat 0, when requested

  std::size_t n_repeats() const { return repeats.size(); }
};

struct RepeatOptions {
  SplitOptions split;
  std::size_t n_repeats = 100;
  std::uint64_t base_seed = 0;
  unsigned jobs = 1;
  bool keep_first_model = false;
  std::vector<std::string> feature_names;  // attached to the kept model
};

/// Test hook: replaces training with an arbitrary predictor.
using Predictor = std::function<AnyModel(const BinaryDataset&, const TrainConfig&)>;

inline RepeatRecord evaluate_split(const SampleSet& samples, const OvaSplit& split,
                                   const AnyModel& model, const Scaler& scaler) {
  RepeatRecord rec;
  rec.seed = split.seed;
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // speaker -> (pos, total)
  std::map<std::string, bool> truth;
  std::vector<double> x;
  for (std::size_t i : split.test) {
    const auto& s = samples.samples[i];
    x = scaler.apply(s.vector);
    const int label = predict_label(model, x);
    const bool actual = s.city == split.target;
    if (label == 1 && actual) ++rec.chunk.tp;
    if (label == 1 && !actual) ++rec.chunk.fp;
    if (label == 0 && actual) ++rec.chunk.fn;
    if (label == 0 && !actual) ++rec.chunk.tn;
    auto& v = votes[s.speaker_id];
    v.first += static_cast<std::size_t>(label);
    v.second += 1;
    truth[s.speaker_id] = actual;
  }
  for (const auto& [sp, v] : votes) {
    const bool label = 2 * v.first > v.second;  // ties go negative
    const bool actual = truth[sp];
    if (label && actual) ++rec.speaker.tp;
    if (label && !actual) ++rec.speaker.fp;
    if (!label && actual) ++rec.speaker.fn;
    if (!label && !actual) ++rec.speaker.tn;
  }
  rec.chunk_prf = compute_prf(rec.chunk);
  rec.speaker_prf = compute_prf(rec.speaker);
  return rec;
}

inline BinaryDataset build_training_set(const SampleSet& samples, const OvaSplit& split, Scaler& scaler) {
  std::vector<std::size_t> idx = split.train_positive;
  idx.insert(idx.end(), split.train_negative.begin(), split.train_negative.end());
  std::vector<std::span<const double>> views;
  views.reserve(idx.size());
  for (std::size_t i : idx) views.emplace_back(samples.samples[i].vector);
  scaler = fit_scaler(std::span<const std::span<const double>>(views));
  BinaryDataset data;
  const auto d = static_cast<Eigen::Index>(samples.dim());
  data.x.resize(static_cast<Eigen::Index>(idx.size()), d);
  data.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto z = scaler.apply(samples.samples[idx[r]].vector);
    data.x.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), d);
    data.y[static_cast<Eigen::Index>(r)] = r < split.train_positive.size() ? 1.0 : 0.0;
  }
  return data;
}

inline void finalize(CityResult& r) {
  r.precision.clear();
  r.recall.clear();
  r.f1.clear();
  std::vector<double> sf1;
  for (const auto& rep : r.repeats) {
    r.precision.push_back(rep.chunk_prf.precision);
    r.recall.push_back(rep.chunk_prf.recall);
    r.f1.push_back(rep.chunk_prf.f1);
    sf1.push_back(rep.speaker_prf.f1);
  }
  r.precision_stat = mean_std(r.precision);
  r.recall_stat = mean_std(r.recall);
  r.f1_stat = mean_std(r.f1);
  r.speaker_f1_stat = mean_std(sf1);
}

/// Repeat i uses seed base_seed + i for both the split and the training
/// shuffle. Repeats run concurrently but results are stored by index.
inline CityResult run_repeats(const SampleSet& samples, const CityLabel& target, ClassifierKind kind,
                              const TrainConfig& train_cfg, const RepeatOptions& opts,
                              const Predictor& trainer = {}) {
  if (opts.n_repeats < 1) fail<UsageError>("run_repeats: need at least one repeat");
  CityResult result;
  result.city = target;
  result.classifier = kind;
  result.repeats.resize(opts.n_repeats);
  parallel_for(opts.n_repeats, opts.jobs, [&](std::size_t i) {
    const std::uint64_t seed = opts.base_seed + i;
    try {
      const OvaSplit split = make_ova_split(samples, target, seed, opts.split);
      Scaler scaler;
      const BinaryDataset data = build_training_set(samples, split, scaler);
      TrainConfig cfg = train_cfg;
      cfg.seed = seed;
      AnyModel model = trainer ? trainer(data, cfg) : train(kind, data, cfg);
      result.repeats[i] = evaluate_split(samples, split, model, scaler);
      result.repeats[i].n_train = static_cast<std::size_t>(data.size());
      if (i == 0 && opts.keep_first_model) {
        std::visit([&](auto& m) { m.feature_names = opts.feature_names; }, model);
        result.first_model = std::move(model);
      }
    } catch (const Error& e) {
      fail("repeat ", i, " (seed ", seed, ") for ", target.to_string(), " failed: ", e.what());
    }
  });
  finalize(result);
  return result;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSetup {
  FeatureKind feature = FeatureKind::Mfcc;
  std::size_t n_frames = 200;  // ignored for Formant
  ClassifierKind classifier = ClassifierKind::LogReg;
};

inline std::string feature_display(FeatureKind k) {
  switch (k) {
    case FeatureKind::Formant: return "Formant";
    case FeatureKind::Mfcc: return "MFCCs";
    case FeatureKind::Embedding: return "wav2vec2.0";
  }
  return "?";
}

inline std::string classifier_display(ClassifierKind k) {
  return k == ClassifierKind::LogReg ? "LR" : "MLPs";
}

/// Row label such as "MFCCs + 200 Frames + MLPs" or "Formant + LR".
inline std::string setup_label(const ExperimentSetup& s) {
  std::string out = feature_display(s.feature);
  if (s.feature != FeatureKind::Formant) out += " + " + std::to_string(s.n_frames) + " Frames";
  return out + " + " + classifier_display(s.classifier);
}

struct EvalReport {
  ExperimentSetup setup;
  nlohmann::ordered_json config;  // every knob that shaped the run
  std::string digest;             // sha256 of config
  std::vector<CityResult> cities;
  double average_f1 = 0.0;
  std::vector<double> repeat_average_f1;  // per repeat, mean over cities

  const CityResult* find(const CityLabel& c) const {
    for (const auto& r : cities) {
      if (r.city == c) return &r;
    }
    return nullptr;
  }
};

struct ExperimentOptions {
  RepeatOptions repeats;
  nlohmann::ordered_json extra_config = nlohmann::ordered_json::object();
};

inline EvalReport run_experiment(const SampleSet& samples, const ExperimentSetup& setup,
                                 const TrainConfig& train_cfg, const ExperimentOptions& opts,
                                 const Predictor& trainer = {}) {
  std::map<CityLabel, std::size_t> counts;
  for (const auto& s : samples.samples) ++counts[s.city];
  std::string missing;
  for (const auto& c : CityLabel::named_cities()) {
    if (!counts.count(c)) missing += (missing.empty() ? "" : ", ") + c.to_string();
  }
  if (!missing.empty()) fail("experiment: no samples for city/cities ", missing);

  EvalReport report;
  report.setup = setup;
  nlohmann::ordered_json cfg;
  cfg["label"] = setup_label(setup);
  cfg["feature"] = to_string(setup.feature);
  cfg["n_frames"] = setup.feature == FeatureKind::Formant ? nlohmann::ordered_json(nullptr)
                                                          : nlohmann::ordered_json(setup.n_frames);
  cfg["classifier"] = to_string(setup.classifier);
  cfg["train"] = train_cfg.to_json();
  cfg["n_repeats"] = opts.repeats.n_repeats;
  cfg["base_seed"] = opts.repeats.base_seed;
  cfg["repeat_seed_rule"] = "base_seed + repeat_index";
  cfg["test_fraction"] = opts.repeats.split.test_fraction;
  cfg["test_unit"] = "speaker";
  cfg["metric_unit"] = "chunk (speaker majority vote reported alongside)";
  cfg["negatives"] = opts.repeats.split.stratified_negatives ? "stratified by city" : "uniform joint";
  cfg["standardization"] = "z-score fit on training split, applied to test split";
  cfg["n_samples"] = samples.samples.size();
  cfg["dim"] = samples.dim();
  for (const auto& [k, v] : opts.extra_config.items()) cfg[k] = v;
  report.config = cfg;
  report.digest = sha256_hex(cfg.dump());

  for (const auto& c : CityLabel::named_cities()) {
    report.cities.push_back(run_repeats(samples, c, setup.classifier, train_cfg, opts.repeats, trainer));
  }
  double s = 0.0;
  for (const auto& r : report.cities) s += r.f1_stat.mean;
  report.average_f1 = s / static_cast<double>(report.cities.size());
  report.repeat_average_f1.assign(opts.repeats.n_repeats, 0.0);
  for (std::size_t i = 0; i < opts.repeats.n_repeats; ++i) {
    double a = 0.0;
    for (const auto& r : report.cities) a += r.f1[i];
    report.repeat_average_f1[i] = a / static_cast<double>(report.cities.size());
  }
  return report;
}

struct SweepPoint {
  std::size_t n_frames = 0;
  double average_f1 = 0.0;
  double std = 0.0;  // over repeats of the cross-city average F1
};

struct SweepReport {
  ClassifierKind classifier = ClassifierKind::LogReg;
  FeatureKind feature = FeatureKind::Mfcc;
  std::vector<SweepPoint> points;
  std::vector<EvalReport> reports;

  std::string to_csv() const {
    std::string out = "n_frames,avg_f1,std\n";
    char buf[96];
    for (const auto& p : points) {
      std::snprintf(buf, sizeof buf, "%zu,%.2f,%.2f\n", p.n_frames, p.average_f1, p.std);
      out += buf;
    }
    return out;
  }
};

inline SweepReport frame_sweep(std::span<const FeatureMatrix> matrices, FeatureKind kind,
                               const std::vector<std::size_t>& frame_list, ClassifierKind classifier,
                               const TrainConfig& train_cfg, const ExperimentOptions& opts) {
  if (kind == FeatureKind::Formant) fail<UsageError>("sweep: formant features are not chunked");
  if (frame_list.empty()) fail<UsageError>("sweep: empty frame list");
  for (std::size_t i = 0; i < frame_list.size(); ++i) {
    if (frame_list[i] < 1) fail<UsageError>("sweep: frame counts must be >= 1");
    if (i > 0 && frame_list[i] <= frame_list[i - 1]) fail<UsageError>("sweep: frame list must be ascending");
  }
  SweepReport sweep;
  sweep.classifier = classifier;
  sweep.feature = kind;
  for (std::size_t n : frame_list) {
    const SampleSet set = segment_all(matrices, n, kind);
    EvalReport r = run_experiment(set, {kind, n, classifier}, train_cfg, opts);
    sweep.points.push_back({n, r.average_f1, mean_std(r.repeat_average_f1).std});
    sweep.reports.push_back(std::move(r));
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline nlohmann::ordered_json to_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline nlohmann::ordered_json to_json(const CityResult& r) {
  nlohmann::ordered_json j;
  j["city"] = r.city.to_string();
  j["classifier"] = to_string(r.classifier);
  j["n_repeats"] = r.n_repeats();
  j["precision"] = {{"mean", r.precision_stat.mean}, {"std", r.precision_stat.std}};
  j["recall"] = {{"mean", r.recall_stat.mean}, {"std", r.recall_stat.std}};
  j["f1"] = {{"mean", r.f1_stat.mean}, {"std", r.f1_stat.std}};
  j["speaker_vote_f1"] = {{"mean", r.speaker_f1_stat.mean}, {"std", r.speaker_f1_stat.std}};
  auto reps = nlohmann::ordered_json::array();
  for (const auto& rep : r.repeats) {
    reps.push_back({{"seed", rep.seed},
                    {"n_train", rep.n_train},
                    {"chunk", to_json(rep.chunk)},
                    {"precision", rep.chunk_prf.precision},
                    {"recall", rep.chunk_prf.recall},
                    {"f1", rep.chunk_prf.f1},
                    {"speaker_vote", to_json(rep.speaker)},
                    {"speaker_precision", rep.speaker_prf.precision},
                    {"speaker_recall", rep.speaker_prf.recall},
                    {"speaker_f1", rep.speaker_prf.f1}});
  }
  j["repeats"] = std::move(reps);
  return j;
}

inline std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["label"] = setup_label(r.setup);
  j["digest"] = r.digest;
  j["config"] = r.config;
  j["average_f1"] = r.average_f1;
  j["repeat_average_f1"] = r.repeat_average_f1;
  auto cities = nlohmann::ordered_json::array();
  for (const auto& c : r.cities) cities.push_back(to_json(c));
  j["cities"] = std::move(cities);
  return j.dump(2) + "\n";
}

inline std::string summary_line(const EvalReport& r) {
  return setup_label(r.setup) + ": avg F1 = " + fmt2(r.average_f1);
}

inline std::string table_caption(FeatureKind kind, std::size_t n_frames) {
  switch (kind) {
    case FeatureKind::Formant: return "Results of Formant Measurements Modelling";
    case FeatureKind::Mfcc:
      return "Results of MFCCs Modelling + " + std::to_string(n_frames) + " Frames Segmentation";
    case FeatureKind::Embedding:
      return "Results of wav2vec2.0 Modelling + " + std::to_string(n_frames) + " Frames Segmentation";
  }
  return "";
}

/// Per-city P/R/F1 under both classifiers for one feature setup. A missing
/// classifier renders as "-" cells.
inline std::string render_city_table(const EvalReport* logreg, const EvalReport* mlp) {
  const EvalReport* any = logreg ? logreg : mlp;
  if (!any) fail("render: no report given");
  if (logreg && mlp && (logreg->setup.feature != mlp->setup.feature ||
                        (logreg->setup.feature != FeatureKind::Formant &&
                         logreg->setup.n_frames != mlp->setup.n_frames))) {
    fail("render: reports describe different feature setups");
  }
  std::string out = "Table: " + table_caption(any->setup.feature, any->setup.n_frames) + "\n\n";
  out += "| Model | Logistic Regression | | | MLPs | | |\n";
  out += "|---|---|---|---|---|---|---|\n";
  out += "| City \\ Metric | P | R | F1 | P | R | F1 |\n";
  auto cells = [](const EvalReport* r, const CityLabel& c) -> std::string {
    const CityResult* cr = r ? r->find(c) : nullptr;
    if (!cr) return " - | - | - |";
    return " " + fmt2(cr->precision_stat.mean) + " | " + fmt2(cr->recall_stat.mean) + " | " +
           fmt2(cr->f1_stat.mean) + " |";
  };
  for (const auto& c : CityLabel::named_cities()) {
    out += "| " + c.to_string() + " |" + cells(logreg, c) + cells(mlp, c) + "\n";
  }
  return out;
}

/// Setup label -> average F1, one row per report.
inline std::string render_summary_table(std::span<const EvalReport* const> reports) {
  std::string out = "Table: Different Experimental Setups' Average F1 Score under Binary Classification\n\n";
  out += "| Experimental Setup | Average F1 Score |\n";
  out += "|---|---|\n";
  for (const auto* r : reports) out += "| " + setup_label(r->setup) + " | " + fmt2(r->average_f1) + " |\n";
  return out;
}

}  // namespace accent
