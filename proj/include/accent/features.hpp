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

// Accent representations: per-speaker formant vectors, fixed-length chunks of
// frame-level features, z-scoring, and the ACCEMB01 embedding container.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "accent/corpus.hpp"
#include "accent/dsp.hpp"
#include "accent/error.hpp"
#include "accent/inventory.hpp"
#include "json.hpp"

namespace accent {

// ---------------------------------------------------------------------------
// Formant speaker vectors

enum class SlotAggregate { Mean, Median };

struct FormantSpeakerVector {
  std::string speaker_id;
  CityLabel city;
  std::vector<double> values;        // 60 slots
  std::vector<std::size_t> coverage;  // measured tokens per slot
  std::size_t skipped_tokens = 0;     // unmeasurable
};

/// Time points (seconds) at which a vowel token is measured: the midpoint for
/// monophthongs, 20% and 80% of the duration for diphthongs.
inline std::vector<double> measurement_times(const PhoneInterval& iv, VowelClass vc) {
  const double d = iv.end - iv.start;
  switch (vc) {
    case VowelClass::Monophthong: return {iv.start + 0.5 * d};
    case VowelClass::Diphthong: return {iv.start + 0.2 * d, iv.start + 0.8 * d};
    case VowelClass::NotVowel: break;
  }
  return {};
}

inline double aggregate(std::vector<double> v, SlotAggregate how) {
  if (how == SlotAggregate::Mean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline FormantSpeakerVector build_formant_vector(const Recording& rec, const AudioBuffer& audio,
                                                 const AlignmentTier& tier,
                                                 const VowelInventory& inventory,
                                                 const FormantConfig& cfg = {},
                                                 SlotAggregate how = SlotAggregate::Mean) {
  if (inventory.entries().empty()) fail("formant vector: empty vowel inventory");
  if (!tier.intervals.empty() && tier.intervals.back().end > audio.duration() + 0.01) {
    fail("formant vector for ", rec.speaker_id, ": alignment ends at ",
         tier.intervals.back().end, " s but audio lasts ", audio.duration(), " s");
  }
  const int n_slots = VowelInventory::kSlots;
  std::vector<std::vector<double>> per_slot(n_slots);
  FormantSpeakerVector out;
  out.speaker_id = rec.speaker_id;
  out.city = rec.city;
  for (const auto& iv : tier.intervals) {
    const VowelEntry* e = inventory.find(iv.label);
    if (!e) continue;
    const auto times = measurement_times(iv, e->vowel_class);
    std::vector<FormantPair> pairs;
    try {
      for (double t : times) pairs.push_back(formants_at(audio, t, cfg));
    } catch (const Error&) {
      // Unmeasurable tokens (too few resonances, window off the edge) are
      // skipped whole so a diphthong never contributes only its onglide.
      ++out.skipped_tokens;
      continue;
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      per_slot[e->slots[2 * p]].push_back(pairs[p].f1);
      per_slot[e->slots[2 * p + 1]].push_back(pairs[p].f2);
    }
  }
  out.values.assign(n_slots, 0.0);
  out.coverage.assign(n_slots, 0);
  std::string missing;
  for (const auto& e : inventory.entries()) {
    if (per_slot[e.slots[0]].empty()) missing += (missing.empty() ? "" : ", ") + e.phone;
  }
  if (!missing.empty()) {
    fail("formant vector for ", rec.speaker_id, ": no measurable tokens for vowel(s) ", missing);
  }
  for (int s = 0; s < n_slots; ++s) {
    out.coverage[s] = per_slot[s].size();
    out.values[s] = aggregate(per_slot[s], how);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Z-scoring

struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t dim() const { return means.size(); }

  std::vector<double> apply(std::span<const double> x) const {
    if (x.size() != means.size()) {
      fail("scaler: dimension mismatch (scaler ", means.size(), ", vector ", x.size(), ")");
    }
    std::vector<double> out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - means[d]) / stds[d];
    return out;
  }

  void apply_inplace(std::span<double> x) const {
    if (x.size() != means.size()) fail("scaler: dimension mismatch");
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = (x[d] - means[d]) / stds[d];
  }
};

/// Per-dimension mean and population standard deviation (two-pass).
inline Scaler fit_scaler(std::span<const std::span<const double>> vectors) {
  if (vectors.size() < 2) fail("fit_scaler: need at least 2 vectors, got ", vectors.size());
  const std::size_t d = vectors[0].size();
  if (d == 0) fail("fit_scaler: zero-dimensional vectors");
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) {
      fail("fit_scaler: dimension mismatch at vector ", i, " (", vectors[i].size(), " vs ", d, ")");
    }
  }
  const double n = static_cast<double>(vectors.size());
  Scaler s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 0.0);
  for (const auto& v : vectors) {
    for (std::size_t k = 0; k < d; ++k) s.means[k] += v[k];
  }
  for (auto& m : s.means) m /= n;
  for (const auto& v : vectors) {
    for (std::size_t k = 0; k < d; ++k) {
      const double c = v[k] - s.means[k];
      s.stds[k] += c * c;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    s.stds[k] = std::sqrt(s.stds[k] / n);
    if (!(s.stds[k] > 0.0)) fail("fit_scaler: dimension ", k, " is constant (std = 0)");
  }
  return s;
}

inline Scaler fit_scaler(const std::vector<std::vector<double>>& vectors) {
  std::vector<std::span<const double>> views(vectors.begin(), vectors.end());
  return fit_scaler(std::span<const std::span<const double>>(views));
}

// ---------------------------------------------------------------------------
// Sample sets

enum class FeatureKind { Formant, Mfcc, Embedding };

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Formant: return "formant";
    case FeatureKind::Mfcc: return "mfcc";
    case FeatureKind::Embedding: return "embedding";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "formant" || s == "formants") return FeatureKind::Formant;
  if (s == "mfcc") return FeatureKind::Mfcc;
  if (s == "embedding" || s == "embeddings") return FeatureKind::Embedding;
  fail<UsageError>("unknown feature kind '", s, "' (expected formant|mfcc|embedding)");
}

struct Sample {
  std::vector<double> vector;
  CityLabel city;
  std::string speaker_id;
  std::size_t chunk_index = 0;
};

struct SampleSet {
  std::vector<Sample> samples;
  FeatureKind feature_kind = FeatureKind::Mfcc;
  std::size_t n_frames = 1;  // 1 for Formant
  std::vector<std::string> short_recordings;  // contributed no chunks

  std::size_t dim() const { return samples.empty() ? 0 : samples.front().vector.size(); }

  void append(SampleSet&& other) {
    if (!samples.empty() && !other.samples.empty() && other.dim() != dim()) {
      fail("sample set: cannot mix vector lengths ", dim(), " and ", other.dim());
    }
    for (auto& s : other.samples) samples.push_back(std::move(s));
    for (auto& r : other.short_recordings) short_recordings.push_back(std::move(r));
  }
};

/// Cuts a T x D matrix into floor(T / n) non-overlapping windows of n frames,
/// each flattened frame-major into a D*n vector. A recording shorter than n
/// frames yields no samples and is listed in short_recordings.
inline SampleSet segment_chunks(const FeatureMatrix& m, std::size_t n_frames,
                                FeatureKind kind = FeatureKind::Mfcc) {
  if (n_frames < 1) fail<UsageError>("segment_chunks: n_frames must be >= 1");
  SampleSet set;
  set.feature_kind = kind;
  set.n_frames = n_frames;
  const std::size_t k = m.rows / n_frames;
  if (k == 0) {
    set.short_recordings.push_back(m.speaker_id);
    return set;
  }
  set.samples.reserve(k);
  const std::size_t len = n_frames * m.cols;
  for (std::size_t c = 0; c < k; ++c) {
    Sample s;
    s.vector.assign(m.data.begin() + c * len, m.data.begin() + (c + 1) * len);
    s.city = m.city;
    s.speaker_id = m.speaker_id;
    s.chunk_index = c;
    set.samples.push_back(std::move(s));
  }
  return set;
}

inline SampleSet segment_all(std::span<const FeatureMatrix> matrices, std::size_t n_frames,
                             FeatureKind kind) {
  SampleSet set;
  set.feature_kind = kind;
  set.n_frames = n_frames;
  for (const auto& m : matrices) set.append(segment_chunks(m, n_frames, kind));
  return set;
}

inline SampleSet formant_samples(std::span<const FormantSpeakerVector> vectors) {
  SampleSet set;
  set.feature_kind = FeatureKind::Formant;
  set.n_frames = 1;
  for (const auto& v : vectors) set.samples.push_back({v.values, v.city, v.speaker_id, 0});
  return set;
}

// ---------------------------------------------------------------------------
// ACCEMB01 embedding container
//
// Layout (little-endian):
//   "ACCEMB01"            8 bytes
//   u32 header_json_len
//   header JSON           UTF-8, keys speaker_id, city, model_id, layer,
//                         frame_hop_seconds (others preserved)
//   u32 T, u32 D
//   T*D float32           frame-major

inline constexpr char kEmbeddingMagic[8] = {'A', 'C', 'C', 'E', 'M', 'B', '0', '1'};

inline std::size_t embedding_file_size(std::size_t header_len, std::size_t t, std::size_t d) {
  return 8 + 4 + header_len + 4 + 4 + 4 * t * d;
}

inline std::string encode_embedding(const FeatureMatrix& m) {
  m.validate();
  if (m.rows > UINT32_MAX || m.cols > UINT32_MAX) fail("embedding: matrix too large");
  nlohmann::ordered_json header = m.metadata.is_object() ? m.metadata : nlohmann::ordered_json::object();
  header["speaker_id"] = m.speaker_id;
  header["city"] = m.city.to_string();
  if (!header.contains("model_id")) fail("embedding: metadata lacks model_id");
  if (!header.contains("layer")) fail("embedding: metadata lacks layer");
  header["frame_hop_seconds"] = m.frame_hop;
  const std::string hjson = header.dump();
  std::string out;
  out.reserve(embedding_file_size(hjson.size(), m.rows, m.cols));
  out.append(kEmbeddingMagic, 8);
  detail::put_le(out, hjson.size(), 4);
  out += hjson;
  detail::put_le(out, m.rows, 4);
  detail::put_le(out, m.cols, 4);
  for (double v : m.data) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) fail("embedding: value overflows float32");
    std::uint32_t raw;
    std::memcpy(&raw, &f, 4);
    detail::put_le(out, raw, 4);
  }
  return out;
}

inline FeatureMatrix decode_embedding(std::string_view bytes, const std::string& name = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, kEmbeddingMagic, 8) != 0) {
    fail("embedding ", name, ": bad magic (expected ACCEMB01)");
  }
  const std::size_t hlen = detail::le32(p + 8);
  if (bytes.size() < 12 + hlen + 8) {
    fail("embedding ", name, ": file length ", bytes.size(), " too short for declared header length ", hlen);
  }
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail("embedding ", name, ": header is not valid JSON (", e.what(), ")");
  }
  if (!header.is_object()) fail("embedding ", name, ": header must be a JSON object");
  for (const char* key : {"speaker_id", "city", "model_id", "layer", "frame_hop_seconds"}) {
    if (!header.contains(key)) fail("embedding ", name, ": header lacks required key '", key, "'");
  }
  if (!header["speaker_id"].is_string() || !header["city"].is_string()) {
    fail("embedding ", name, ": speaker_id and city must be strings");
  }
  if (!header["frame_hop_seconds"].is_number()) {
    fail("embedding ", name, ": frame_hop_seconds must be a number");
  }
  const std::size_t t = detail::le32(p + 12 + hlen);
  const std::size_t d = detail::le32(p + 16 + hlen);
  if (t == 0 || d == 0) fail("embedding ", name, ": zero frame count or dimension (", t, "x", d, ")");
  const std::size_t want = embedding_file_size(hlen, t, d);
  if (bytes.size() != want) {
    fail("embedding ", name, ": length mismatch (", bytes.size(), " bytes, header declares ", want, ")");
  }
  FeatureMatrix m(t, d);
  const unsigned char* payload = p + 20 + hlen;
  for (std::size_t i = 0; i < t * d; ++i) {
    const std::uint32_t raw = detail::le32(payload + 4 * i);
    float f;
    std::memcpy(&f, &raw, 4);
    if (!std::isfinite(f)) fail("embedding ", name, ": non-finite value at frame ", i / d, ", dim ", i % d);
    m.data[i] = f;
  }
  m.source = header["model_id"] == "mfcc" ? FeatureSource::Mfcc : FeatureSource::Embedding;
  m.speaker_id = header["speaker_id"].get<std::string>();
  m.city = CityLabel::parse(header["city"].get<std::string>());
  m.frame_hop = header["frame_hop_seconds"].get<double>();
  m.metadata = std::move(header);
  return m;
}

inline FeatureMatrix read_embedding_file(const std::filesystem::path& path) {
  return decode_embedding(read_file(path), path.string());
}

inline void write_embedding_file(const FeatureMatrix& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_embedding(m));
}

}  // namespace accent
