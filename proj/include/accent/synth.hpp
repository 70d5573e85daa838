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

// Source-filter speech synthesis and a seeded five-accent test corpus.
//
// Every speaker reads a list of consonant-vowel tokens covering the whole vowel
// inventory, in a speaker-specific order by default. An accent is a set of
// per-vowel formant shifts, a source tilt and a long-term spectral envelope;
// speakers add their own vocal tract scale, pitch, speaking rate and noise.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "accent/corpus.hpp"
#include "accent/dsp.hpp"
#include "accent/features.hpp"
#include "accent/inventory.hpp"
#include "accent/util.hpp"

namespace accent::synth {

/// Second-order resonator y[n] = g x[n] + c1 y[n-1] + c2 y[n-2] with poles
/// at radius exp(-pi b / sr) and angle 2 pi f / sr, unity gain at DC.
class Resonator {
 public:
  double step(double x, double freq, double bw, int sr) {
    const double r = std::exp(-std::numbers::pi * bw / sr);
    const double c1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
    const double c2 = -r * r;
    const double g = 1.0 - c1 - c2;
    const double y = g * x + c1 * y1_ + c2 * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0.0, y2_ = 0.0;
};

struct FormantTrack {
  double f1_on, f2_on, f1_off, f2_off;  // onglide/offglide targets; equal for monophthongs
};

struct VoiceParams {
  double f0 = 120.0;            // Hz
  double glottal_pole = 0.96;   // double real pole shaping the source roll-off
  double tilt = 0.0;            // one-pole tilt filter coefficient (-0.9..0.9)
  double f3 = 2700.0, f4 = 3700.0;
  double noise = 0.002;         // additive white-noise sd
};

/// Synthesises a voiced segment whose F1/F2 glide linearly from the onglide
/// to the offglide targets. Bandwidths are fixed (80, 90, 150, 200 Hz).
inline std::vector<double> vowel_segment(const FormantTrack& track, double duration, int sr,
                                         const VoiceParams& voice, Rng& rng) {
  const auto n = static_cast<std::size_t>(duration * sr);
  std::vector<double> out(n);
  Resonator r1, r2, r3, r4;
  double phase = rng.uniform();
  double g1 = 0.0, g2 = 0.0, prev = 0.0, tilt_state = 0.0;
  const double gp = voice.glottal_pole;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    phase += voice.f0 * (1.0 + 0.01 * rng.normal()) / sr;
    double src = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      src = 1.0;
    }
    src += 0.01 * rng.normal();
    // Glottal roll-off, lip radiation, tilt.
    const double g = src + 2.0 * gp * g1 - gp * gp * g2;
    g2 = g1;
    g1 = g;
    const double rad = g - prev;
    prev = g;
    tilt_state = rad + voice.tilt * tilt_state;
    const double f1 = track.f1_on + u * (track.f1_off - track.f1_on);
    const double f2 = track.f2_on + u * (track.f2_off - track.f2_on);
    double y = r1.step(tilt_state, f1, 80.0, sr);
    y = r2.step(y, f2, 90.0, sr);
    y = r3.step(y, voice.f3, 150.0, sr);
    y = r4.step(y, voice.f4, 200.0, sr);
    out[i] = y;
  }
  // Peak-normalise, then 15 ms raised-cosine ramps.
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const auto ramp = std::min<std::size_t>(n / 2, static_cast<std::size_t>(0.015 * sr));
  for (std::size_t i = 0; i < n; ++i) {
    double e = 1.0;
    if (i < ramp) e = 0.5 - 0.5 * std::cos(std::numbers::pi * i / ramp);
    if (n - 1 - i < ramp) e = std::min(e, 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / ramp));
    out[i] = (peak > 0 ? out[i] / peak : 0.0) * e + voice.noise * rng.normal();
  }
  return out;
}

/// Band-limited noise burst (800 Hz wide) standing in for an obstruent.
inline std::vector<double> noise_segment(double centre, double duration, int sr, double level, Rng& rng) {
  const auto n = static_cast<std::size_t>(duration * sr);
  std::vector<double> out(n);
  Resonator r;
  for (std::size_t i = 0; i < n; ++i) out[i] = r.step(rng.normal(), centre, 800.0, sr);
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  for (auto& v : out) v = peak > 0 ? level * v / peak : 0.0;
  return out;
}

/// Imposes a spectral envelope whose log gain is a cosine of order `order`
/// along the mel axis, gain_dB(f) = depth * cos(order * pi * mel(f) / mel(sr/2)).
/// The depth is redrawn as N(depth_db, jitter_db) for every 10 ms block, so
/// the envelope is only visible on average. Short-time processing uses 20 ms
/// Hann windows at 50% overlap (unit overlap-add sum).
inline void apply_envelope(std::vector<double>& x, int order, double depth_db, double jitter_db, int sr,
                           Rng& rng) {
  if (x.empty() || (depth_db == 0.0 && jitter_db == 0.0)) return;
  const std::size_t hop = static_cast<std::size_t>(0.010 * sr);
  const std::size_t win = 2 * hop;
  std::size_t n_fft = 1;
  while (n_fft < 2 * win) n_fft <<= 1;
  std::vector<double> shape(n_fft / 2 + 1);
  const double mel_top = hz_to_mel(0.5 * sr);
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const double f = static_cast<double>(k) * sr / static_cast<double>(n_fft);
    shape[k] = std::cos(order * std::numbers::pi * hz_to_mel(f) / mel_top);
  }
  std::vector<double> w(win);
  for (std::size_t i = 0; i < win; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);
  std::vector<double> out(x.size() + n_fft, 0.0);
  std::vector<std::complex<double>> a(n_fft);
  for (std::size_t start = 0; start < x.size(); start += hop) {
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t i = 0; i < win && start + i < x.size(); ++i) a[i] = x[start + i] * w[i];
    fft(a);
    const double depth = depth_db + jitter_db * rng.normal();
    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
      const double g = std::pow(10.0, depth * shape[k] / 20.0);
      a[k] *= g;
      if (k != 0 && k != n_fft / 2) a[n_fft - k] *= g;
    }
    for (auto& v : a) v = std::conj(v);
    fft(a);
    for (std::size_t i = 0; i < n_fft; ++i) out[start + i] += a[i].real() / static_cast<double>(n_fft);
  }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = out[i];
}

// Reference (F1, F2) onglide/offglide targets for the default inventory.
inline const std::map<std::string, FormantTrack>& base_tracks() {
  static const std::map<std::string, FormantTrack> t = {
      {"IY", {280, 2250, 280, 2250}}, {"IH", {400, 1950, 400, 1950}}, {"EH", {540, 1800, 540, 1800}},
      {"AE", {660, 1700, 660, 1700}}, {"AA", {720, 1100, 720, 1100}}, {"AO", {570, 850, 570, 850}},
      {"UH", {450, 1050, 450, 1050}}, {"UW", {310, 900, 310, 900}},   {"AH", {630, 1200, 630, 1200}},
      {"ER", {490, 1350, 490, 1350}}, {"AX", {500, 1450, 500, 1450}}, {"IX", {410, 1700, 410, 1700}},
      {"UX", {350, 1300, 350, 1300}}, {"AXR", {470, 1250, 470, 1250}},
      {"EY", {480, 1850, 350, 2150}}, {"AY", {700, 1200, 420, 1950}}, {"OY", {550, 850, 420, 1900}},
      {"AW", {700, 1250, 450, 950}},  {"OW", {500, 1000, 360, 880}},  {"IA", {350, 2100, 550, 1450}},
      {"EA", {560, 1800, 580, 1400}}, {"UA", {350, 950, 560, 1350}},
  };
  return t;
}

struct AccentProfile {
  CityLabel city;
  std::string prefix;
  double tilt = 0.0;       // accent contribution to the source tilt
  int envelope_order = 0;  // cosine order of the accent's long-term envelope
  std::map<std::string, std::array<double, 4>> shift;  // relative shifts of f1_on, f2_on, f1_off, f2_off
};

inline FormantTrack apply_shift(const FormantTrack& base, const std::array<double, 4>& s, double scale) {
  FormantTrack t{base.f1_on * (1 + s[0]) * scale, base.f2_on * (1 + s[1]) * scale,
                 base.f1_off * (1 + s[2]) * scale, base.f2_off * (1 + s[3]) * scale};
  // Keep F2 clear of F1.
  t.f2_on = std::max(t.f2_on, t.f1_on + 250.0);
  t.f2_off = std::max(t.f2_off, t.f1_off + 250.0);
  return t;
}

/// Five accent profiles. Envelope orders are fixed and distinct, so each
/// accent's envelope lands on its own cepstral coefficient; per-vowel formant
/// shifts are drawn from the seed.
inline std::vector<AccentProfile> accent_profiles(std::uint64_t seed) {
  const std::array<double, 5> tilts = {-0.3, -0.15, 0.0, 0.15, 0.3};
  const std::array<int, 5> orders = {6, 9, 12, 15, 18};
  const std::array<const char*, 5> prefixes = {"LEE", "LIV", "MAN", "NEW", "SHE"};
  std::vector<AccentProfile> out;
  const auto cities = CityLabel::named_cities();
  for (std::size_t c = 0; c < cities.size(); ++c) {
    Rng rng(seed * 1000003ULL + 17 * (c + 1));
    AccentProfile p;
    p.city = cities[c];
    p.prefix = prefixes[c];
    p.tilt = tilts[c];
    p.envelope_order = orders[c];
    for (const auto& [phone, track] : base_tracks()) {
      p.shift[phone] = {rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12),
                        rng.uniform(-0.12, 0.12)};
    }
    out.push_back(std::move(p));
  }
  return out;
}

struct PassageToken {
  std::string label;
  double duration;  // seconds at speaking rate 1
  bool vowel;
};

/// A reading list: `repeats` passes over the inventory in an order drawn from
/// `order_seed`, each vowel preceded by an obstruent, framed by silence.
inline std::vector<PassageToken> passage(const VowelInventory& inv, int repeats, std::uint64_t order_seed) {
  Rng rng(order_seed);
  const std::array<const char*, 4> consonants = {"S", "F", "SH", "T"};
  std::vector<PassageToken> out{{"sil", 0.2, false}};
  for (int r = 0; r < repeats; ++r) {
    std::vector<const VowelEntry*> order;
    for (const auto& e : inv.entries()) order.push_back(&e);
    rng.shuffle(order);
    for (const auto* e : order) {
      out.push_back({consonants[rng.below(consonants.size())], rng.uniform(0.06, 0.10), false});
      const bool diph = e->vowel_class == VowelClass::Diphthong;
      out.push_back({e->phone + "1", diph ? rng.uniform(0.18, 0.26) : rng.uniform(0.12, 0.20), true});
    }
  }
  out.push_back({"sil", 0.2, false});
  return out;
}

struct SynthConfig {
  std::size_t speakers_per_city = 21;
  int sample_rate = 16000;
  int passage_repeats = 2;
  bool write_embeddings = true;
  std::size_t embed_dim = 32;
  double embed_hop = 0.02;
  double envelope_db = 3.0;          // mean depth of the accent envelope; 0 disables it
  double envelope_jitter_db = 18.0;  // per-10 ms spread of that depth
  double noise = 0.02;               // additive white-noise sd before the output gain
  bool shared_passage = false;       // every speaker reads the same token order
  double speaker_spread = 0.5;       // scales pitch, size, rate and tilt variation
};

struct SynthSpeaker {
  Recording recording;
  AudioBuffer audio;
  AlignmentTier tier;
};

/// One synthetic speaker. Deterministic in (seed, city index, speaker index).
inline SynthSpeaker synthesize_speaker(const AccentProfile& accent, std::size_t index, std::uint64_t seed,
                                       const SynthConfig& cfg) {
  const auto& inv = VowelInventory::default_inventory();
  // FNV-1a of the prefix; std::hash is not stable across standard libraries.
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : accent.prefix) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
  Rng rng(seed * 7919ULL ^ h ^ (index * 0x9E3779B97F4A7C15ULL));

  SynthSpeaker sp;
  char id[32];
  std::snprintf(id, sizeof id, "%s%02zu", accent.prefix.c_str(), index + 1);
  sp.recording.speaker_id = id;
  sp.recording.city = accent.city;
  sp.recording.sample_rate = cfg.sample_rate;

  const double k = cfg.speaker_spread;
  const double scale = 1.0 + k * rng.uniform(-0.05, 0.05);
  const double rate = 1.0 + k * rng.uniform(-0.1, 0.1);
  VoiceParams voice;
  voice.f0 = 140.0 * (1.0 + k * rng.uniform(-0.3, 0.4));
  voice.tilt = accent.tilt + k * rng.uniform(-0.1, 0.1);
  voice.f3 = 2700.0 * scale;
  voice.f4 = 3700.0 * scale;
  voice.noise = cfg.noise;
  const double gain = rng.uniform(0.3, 0.7);

  sp.tier.tier_name = "phones";
  std::vector<double> samples;
  const int sr = cfg.sample_rate;
  const std::uint64_t order_seed = cfg.shared_passage ? 0x5EED : rng.next_u64();
  for (const auto& tok : passage(inv, cfg.passage_repeats, order_seed)) {
    const double dur = tok.duration * rate;
    std::vector<double> seg;
    if (tok.label == "sil") {
      seg.assign(static_cast<std::size_t>(dur * sr), 0.0);
      for (auto& v : seg) v = voice.noise * rng.normal();
    } else if (tok.vowel) {
      const std::string phone = strip_stress(tok.label);
      auto shift = accent.shift.at(phone);
      for (auto& s : shift) s += rng.uniform(-0.03, 0.03);
      const FormantTrack track = apply_shift(base_tracks().at(phone), shift, scale);
      seg = vowel_segment(track, dur, sr, voice, rng);
    } else {
      const double centre = tok.label == "S" ? 6600.0 : tok.label == "SH" ? 5800.0 : tok.label == "F" ? 7000.0 : 6200.0;
      seg = noise_segment(std::min(centre, 0.45 * sr), dur, sr, 0.15, rng);
    }
    const double start = static_cast<double>(samples.size()) / sr;
    samples.insert(samples.end(), seg.begin(), seg.end());
    const double end = static_cast<double>(samples.size()) / sr;
    sp.tier.intervals.push_back({tok.label, start, end, inv.classify(tok.label)});
  }
  apply_envelope(samples, accent.envelope_order, cfg.envelope_db, cfg.envelope_jitter_db, sr, rng);
  for (auto& v : samples) v = std::clamp(v * gain, -1.0, 1.0);
  sp.audio.sample_rate = sr;
  sp.audio.samples = std::move(samples);
  sp.recording.duration = sp.audio.duration();
  return sp;
}

/// Frame-level pseudo-embeddings: accent mean + speaker offset + frame noise.
inline FeatureMatrix synth_embedding(const AccentProfile& accent, const Recording& rec, std::size_t index,
                                     std::uint64_t seed, const SynthConfig& cfg) {
  Rng accent_rng(seed * 31ULL + 0xE3B + static_cast<std::uint64_t>(accent.city.kind()));
  std::vector<double> mean(cfg.embed_dim);
  for (auto& m : mean) m = accent_rng.normal();
  Rng rng(seed * 131ULL + static_cast<std::uint64_t>(accent.city.kind()) * 1000 + index);
  std::vector<double> offset(cfg.embed_dim);
  for (auto& o : offset) o = rng.normal(0.0, 0.5);
  const auto t = static_cast<std::size_t>(rec.duration / cfg.embed_hop);
  FeatureMatrix m(std::max<std::size_t>(t, 1), cfg.embed_dim);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t d = 0; d < m.cols; ++d) {
      m(i, d) = static_cast<float>(mean[d] + offset[d] + rng.normal(0.0, 1.5));
    }
  }
  m.frame_hop = cfg.embed_hop;
  m.source = FeatureSource::Embedding;
  m.speaker_id = rec.speaker_id;
  m.city = rec.city;
  m.metadata = {{"speaker_id", rec.speaker_id}, {"city", rec.city.to_string()},
                {"model_id", "synthetic-embedding"}, {"layer", 12}, {"frame_hop_seconds", cfg.embed_hop}};
  return m;
}

struct SynthSummary {
  std::filesystem::path manifest;
  std::size_t n_speakers = 0;
  double total_seconds = 0.0;
};

/// Writes wavs/, alignments/ (TextGrid, tier "phones"), embeddings/ (ACCEMB01)
/// and manifest.csv under `out_dir`.
inline SynthSummary generate_corpus(const std::filesystem::path& out_dir, std::uint64_t seed,
                                    const SynthConfig& cfg = {}, unsigned jobs = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "wavs");
  fs::create_directories(out_dir / "alignments");
  if (cfg.write_embeddings) fs::create_directories(out_dir / "embeddings");
  const auto accents = accent_profiles(seed);
  const std::size_t per = cfg.speakers_per_city;
  std::vector<Recording> recs(accents.size() * per);
  parallel_for(recs.size(), jobs, [&](std::size_t k) {
    const auto& acc = accents[k / per];
    SynthSpeaker sp = synthesize_speaker(acc, k % per, seed, cfg);
    const std::string id = sp.recording.speaker_id;
    write_wav(sp.audio, out_dir / "wavs" / (id + ".wav"));
    write_file_atomic(out_dir / "alignments" / (id + ".TextGrid"),
                      alignment_to_textgrid(sp.tier, sp.audio.duration()));
    sp.recording.audio_path = fs::path("wavs") / (id + ".wav");
    sp.recording.alignment_path = fs::path("alignments") / (id + ".TextGrid");
    if (cfg.write_embeddings) {
      write_embedding_file(synth_embedding(acc, sp.recording, k % per, seed, cfg),
                           out_dir / "embeddings" / (id + ".accemb"));
    }
    recs[k] = sp.recording;
  });
  Corpus corpus;
  corpus.recordings = recs;
  SynthSummary s;
  s.manifest = out_dir / "manifest.csv";
  write_file_atomic(s.manifest, manifest_to_csv(corpus));
  s.n_speakers = recs.size();
  for (const auto& r : recs) s.total_seconds += r.duration;
  return s;
}

}  // namespace accent::synth
