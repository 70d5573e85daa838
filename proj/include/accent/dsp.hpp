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

// Signal-processing kernels: framing, FFT, mel filterbank, MFCC, LPC,
// resampling and LPC-root formant estimation.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "accent/corpus.hpp"
#include "accent/error.hpp"
#include "json.hpp"

namespace accent {

// ---------------------------------------------------------------------------
// Feature matrices

enum class FeatureSource { Mfcc, Embedding, Synthetic };

inline std::string_view to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::Mfcc: return "mfcc";
    case FeatureSource::Embedding: return "embedding";
    case FeatureSource::Synthetic: return "synthetic";
  }
  return "?";
}

/// Time-major T x D matrix of per-frame feature vectors.
struct FeatureMatrix {
  std::size_t rows = 0;  // T, frames
  std::size_t cols = 0;  // D, feature dims
  std::vector<double> data;
  double frame_hop = 0.0;  // seconds
  FeatureSource source = FeatureSource::Synthetic;
  std::string speaker_id;
  CityLabel city;
  // Free-form provenance (model id, layer, extractor config...).
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t d) : rows(t), cols(d), data(t * d, 0.0) {}

  double& operator()(std::size_t t, std::size_t d) { return data[t * cols + d]; }
  double operator()(std::size_t t, std::size_t d) const { return data[t * cols + d]; }
  std::span<const double> row(std::size_t t) const { return {data.data() + t * cols, cols}; }
  std::span<double> row(std::size_t t) { return {data.data() + t * cols, cols}; }

  void validate() const {
    if (rows == 0 || cols == 0) fail("feature matrix: empty (", rows, "x", cols, ")");
    if (data.size() != rows * cols) fail("feature matrix: data size mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) fail("feature matrix: non-finite value at flat index ", i);
    }
  }
};

// ---------------------------------------------------------------------------
// Framing and FFT

inline std::size_t seconds_to_samples(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

/// floor((N - L) / H) + 1 frames; the trailing remainder is dropped.
inline std::size_t frame_count(std::size_t n, std::size_t len, std::size_t hop) {
  if (n < len) return 0;
  return (n - len) / hop + 1;
}

inline std::vector<std::vector<double>> frame_signal(std::span<const double> samples,
                                                     std::size_t len, std::size_t hop) {
  if (hop == 0 || len < hop) fail("frame_signal: need frame_length >= hop > 0");
  const std::size_t t = frame_count(samples.size(), len, hop);
  if (t == 0) {
    fail("frame_signal: audio too short for one frame (", samples.size(), " < ", len, " samples)");
  }
  std::vector<std::vector<double>> frames(t);
  for (std::size_t i = 0; i < t; ++i) {
    frames[i].assign(samples.begin() + i * hop, samples.begin() + i * hop + len);
  }
  return frames;
}

inline std::vector<std::vector<double>> frame_signal(const AudioBuffer& audio, double frame_length,
                                                     double hop) {
  return frame_signal(audio.samples, seconds_to_samples(frame_length, audio.sample_rate),
                      seconds_to_samples(hop, audio.sample_rate));
}

inline std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
  }
  return w;
}

inline bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

/// In-place iterative radix-2 FFT.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) fail("fft: size ", n, " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// |X[k]|^2 for k = 0..n_fft/2 of the zero-padded frame.
inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n_fft) {
  if (frame.size() > n_fft) fail("power_spectrum: frame longer than n_fft");
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft(buf);
  std::vector<double> p(n_fft / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(buf[k]);
  return p;
}

// ---------------------------------------------------------------------------
// Mel filterbank and MFCC

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

struct MfccConfig {
  int n_coeffs = 64;   // c_max
  int n_filters = 64;  // M
  double frame_length = 0.025;
  double hop = 0.010;
  std::size_t n_fft = 512;
  double preemphasis = 0.97;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;

  double upper(int sample_rate) const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }

  void validate(int sample_rate) const {
    if (sample_rate <= 0) fail<UsageError>("mfcc config: sample rate must be positive");
    if (n_coeffs < 1 || n_filters < 1) fail<UsageError>("mfcc config: counts must be positive");
    if (n_coeffs > n_filters) {
      fail<UsageError>("mfcc config: n_coeffs (", n_coeffs, ") exceeds n_filters (", n_filters, ")");
    }
    if (!(f_min >= 0.0 && f_min < upper(sample_rate) && upper(sample_rate) <= sample_rate / 2.0)) {
      fail<UsageError>("mfcc config: need 0 <= f_min < f_max <= sample_rate/2");
    }
    if (!is_power_of_two(n_fft)) fail<UsageError>("mfcc config: n_fft must be a power of two");
    if (!(hop > 0.0 && frame_length >= hop)) fail<UsageError>("mfcc config: need frame_length >= hop > 0");
    if (static_cast<double>(n_fft) < frame_length * sample_rate - 1e-9) {
      fail<UsageError>("mfcc config: n_fft shorter than the frame");
    }
    if (!(preemphasis >= 0.0 && preemphasis < 1.0)) fail<UsageError>("mfcc config: preemphasis must be in [0,1)");
    if (!(log_floor > 0.0)) fail<UsageError>("mfcc config: log_floor must be positive");
  }

  nlohmann::ordered_json to_json() const {
    return {{"n_coeffs", n_coeffs},       {"n_filters", n_filters}, {"frame_length", frame_length},
            {"hop", hop},                 {"n_fft", n_fft},         {"preemphasis", preemphasis},
            {"f_min", f_min},             {"f_max", f_max},         {"log_floor", log_floor},
            {"window", "hamming"},        {"spectrum", "power"}};
  }
};

struct MelFilterBank {
  std::size_t n_bins = 0;  // n_fft/2 + 1
  std::vector<std::vector<double>> weights;
  std::vector<double> center_freqs;  // Hz
  std::vector<double> edge_freqs;    // Hz, M + 2 entries
};

/// Triangular filters with centres equally spaced on the mel scale. Each
/// triangle reaches 1 at its centre frequency and 0 at its neighbours'
/// centres; weights are that continuous triangle sampled at FFT bin centres.
inline MelFilterBank mel_filterbank(const MfccConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  MelFilterBank bank;
  const int m = cfg.n_filters;
  bank.n_bins = cfg.n_fft / 2 + 1;
  const double mlo = hz_to_mel(cfg.f_min), mhi = hz_to_mel(cfg.upper(sample_rate));
  bank.edge_freqs.resize(m + 2);
  for (int i = 0; i < m + 2; ++i) bank.edge_freqs[i] = mel_to_hz(mlo + (mhi - mlo) * i / (m + 1));
  bank.center_freqs.assign(bank.edge_freqs.begin() + 1, bank.edge_freqs.end() - 1);
  const double bin_hz = static_cast<double>(sample_rate) / cfg.n_fft;
  bank.weights.assign(m, std::vector<double>(bank.n_bins, 0.0));
  for (int j = 0; j < m; ++j) {
    const double lo = bank.edge_freqs[j], c = bank.edge_freqs[j + 1], hi = bank.edge_freqs[j + 2];
    bool any = false;
    for (std::size_t k = 0; k < bank.n_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > lo && f <= c) {
        w = (f - lo) / (c - lo);
      } else if (f > c && f < hi) {
        w = (hi - f) / (hi - c);
      }
      bank.weights[j][k] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      fail<UsageError>("mel filterbank: filter ", j, " (centre ", c, " Hz) covers no FFT bin; use fewer filters or a larger n_fft");
    }
  }
  return bank;
}

/// The c = 1..c_max rows of sqrt(2/M) cos(c (m - 1/2) pi / M), m = 1..M.
inline Eigen::MatrixXd cepstral_dct_matrix(int c_max, int m) {
  Eigen::MatrixXd d(c_max, m);
  const double scale = std::sqrt(2.0 / m);
  for (int c = 1; c <= c_max; ++c) {
    for (int k = 1; k <= m; ++k) {
      d(c - 1, k - 1) = scale * std::cos(c * (k - 0.5) * std::numbers::pi / m);
    }
  }
  return d;
}

/// Mel filterbank energies X~_m(t) for one frame: pre-emphasis, Hamming
/// window, |FFT|^2, triangular filters. Not floored.
inline std::vector<double> mel_energies(std::span<const double> frame, const MfccConfig& cfg,
                                        const MelFilterBank& bank) {
  std::vector<double> x(frame.begin(), frame.end());
  for (std::size_t i = x.size(); i-- > 1;) x[i] -= cfg.preemphasis * x[i - 1];
  if (!x.empty()) x[0] -= cfg.preemphasis * x[0];
  const auto w = hamming_window(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= w[i];
  const auto p = power_spectrum(x, cfg.n_fft);
  std::vector<double> e(bank.weights.size(), 0.0);
  for (std::size_t j = 0; j < e.size(); ++j) {
    const auto& row = bank.weights[j];
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += row[k] * p[k];
    e[j] = s;
  }
  return e;
}

/// Cepstra from filterbank energies via the precomputed DCT matrix.
inline Eigen::VectorXd cepstra_from_energies(std::span<const double> energies,
                                             const Eigen::MatrixXd& dct, double log_floor) {
  Eigen::VectorXd logs(static_cast<Eigen::Index>(energies.size()));
  for (std::size_t m = 0; m < energies.size(); ++m) {
    logs[static_cast<Eigen::Index>(m)] = std::log(std::max(energies[m], log_floor));
  }
  return dct * logs;
}

class MfccExtractor {
 public:
  MfccExtractor(const MfccConfig& cfg, int sample_rate)
      : cfg_(cfg),
        sample_rate_(sample_rate),
        bank_(mel_filterbank(cfg, sample_rate)),
        dct_(cepstral_dct_matrix(cfg.n_coeffs, cfg.n_filters)) {}

  const MelFilterBank& filterbank() const { return bank_; }
  const Eigen::MatrixXd& dct() const { return dct_; }

  FeatureMatrix compute(const AudioBuffer& audio) const {
    if (audio.sample_rate != sample_rate_) {
      fail("mfcc: audio is ", audio.sample_rate, " Hz, extractor configured for ", sample_rate_, " Hz");
    }
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
      if (!std::isfinite(audio.samples[i])) fail("mfcc: non-finite sample at index ", i);
    }
    const auto frames = frame_signal(audio, cfg_.frame_length, cfg_.hop);
    FeatureMatrix out(frames.size(), static_cast<std::size_t>(cfg_.n_coeffs));
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto e = mel_energies(frames[t], cfg_, bank_);
      const Eigen::VectorXd c = cepstra_from_energies(e, dct_, cfg_.log_floor);
      for (std::size_t k = 0; k < out.cols; ++k) out(t, k) = c[static_cast<Eigen::Index>(k)];
    }
    out.frame_hop = cfg_.hop;
    out.source = FeatureSource::Mfcc;
    out.metadata["extractor"] = "mfcc";
    out.metadata["config"] = cfg_.to_json();
    return out;
  }

 private:
  MfccConfig cfg_;
  int sample_rate_;
  MelFilterBank bank_;
  Eigen::MatrixXd dct_;
};

inline FeatureMatrix mfcc(const AudioBuffer& audio, const MfccConfig& cfg = {}) {
  return MfccExtractor(cfg, audio.sample_rate).compute(audio);
}

// ---------------------------------------------------------------------------
// LPC

struct LpcResult {
  std::vector<double> coeffs;      // a_1..a_p with x[n] ~ sum_k a_k x[n-k]
  std::vector<double> reflection;  // k_1..k_p
  double error = 0.0;              // final prediction error energy
};

/// Autocorrelation-method LPC via the Levinson-Durbin recursion.
inline LpcResult lpc(std::span<const double> frame, int order) {
  if (order < 2) fail("lpc: order must be >= 2");
  if (frame.size() <= static_cast<std::size_t>(order)) {
    fail("lpc: frame of ", frame.size(), " samples is too short for order ", order);
  }
  std::vector<double> r(order + 1, 0.0);
  for (int lag = 0; lag <= order; ++lag) {
    double s = 0.0;
    for (std::size_t i = lag; i < frame.size(); ++i) s += frame[i] * frame[i - lag];
    r[lag] = s;
  }
  if (!(r[0] > 0.0) || !std::isfinite(r[0])) fail("lpc: zero-energy frame");

  LpcResult res;
  std::vector<double> a(order + 1, 0.0), prev(order + 1, 0.0);
  double err = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[i];
    for (int j = 1; j < i; ++j) acc -= a[j] * r[i - j];
    const double k = acc / err;
    if (!(std::abs(k) < 1.0)) fail("lpc: numerical breakdown (|reflection| >= 1 at stage ", i, ")");
    prev = a;
    a[i] = k;
    for (int j = 1; j < i; ++j) a[j] = prev[j] - k * prev[i - j];
    err *= (1.0 - k * k);
    res.reflection.push_back(k);
  }
  res.coeffs.assign(a.begin() + 1, a.end());
  res.error = err;
  return res;
}

/// Roots of z^p - a_1 z^(p-1) - ... - a_p, the denominator of the LPC
/// synthesis filter, via companion-matrix eigenvalues.
inline std::vector<std::complex<double>> lpc_roots(std::span<const double> coeffs) {
  const auto p = static_cast<Eigen::Index>(coeffs.size());
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) comp(0, j) = coeffs[static_cast<std::size_t>(j)];
  for (Eigen::Index i = 1; i < p; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  if (es.info() != Eigen::Success) fail("lpc_roots: eigenvalue solver did not converge");
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) roots[static_cast<std::size_t>(i)] = es.eigenvalues()[i];
  return roots;
}

// ---------------------------------------------------------------------------
// Resampling

/// Band-limited resampling with a Blackman-windowed sinc kernel whose cutoff
/// is the lower of the two Nyquist frequencies.
inline std::vector<double> resample(std::span<const double> x, int sr_in, int sr_out,
                                    int zero_crossings = 16) {
  if (sr_in <= 0 || sr_out <= 0) fail("resample: sample rates must be positive");
  if (sr_in == sr_out) return {x.begin(), x.end()};
  const double ratio = static_cast<double>(sr_out) / sr_in;
  const double cutoff = std::min(1.0, ratio);  // relative to input Nyquist
  const double half = zero_crossings / cutoff;  // kernel half-width in input samples
  const auto n_out = static_cast<std::size_t>(std::floor(x.size() * ratio));
  std::vector<double> y(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    const double pos = j / ratio;
    const auto lo = static_cast<long>(std::ceil(pos - half));
    const auto hi = static_cast<long>(std::floor(pos + half));
    double acc = 0.0;
    for (long k = std::max(0L, lo); k <= std::min<long>(hi, static_cast<long>(x.size()) - 1); ++k) {
      const double u = pos - k;
      const double arg = cutoff * u;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double v = (u / half + 1.0) / 2.0;  // 0..1 across the kernel
      const double win = 0.42 - 0.5 * std::cos(2 * std::numbers::pi * v) +
                         0.08 * std::cos(4 * std::numbers::pi * v);
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc * win;
    }
    y[j] = acc;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Formants

struct FormantConfig {
  double window = 0.025;       // seconds
  int lpc_order = 12;
  double max_formant = 5500.0;  // analysis rate is 2 * max_formant
  double preemphasis_from = 50.0;  // Hz
  double max_bandwidth = 400.0;
  double min_frequency = 90.0;

  nlohmann::ordered_json to_json() const {
    return {{"window", window},
            {"lpc_order", lpc_order},
            {"max_formant", max_formant},
            {"preemphasis_from", preemphasis_from},
            {"max_bandwidth", max_bandwidth},
            {"min_frequency", min_frequency}};
  }
};

struct FormantPair {
  double f1 = 0.0, f2 = 0.0;
  double bandwidth1 = 0.0, bandwidth2 = 0.0;
};

/// Raised when a token yields fewer than two usable resonances.
class UnmeasurableToken : public Error {
 public:
  explicit UnmeasurableToken(const std::string& what) : Error(what) {}
};

struct FormantCandidate {
  double frequency;
  double bandwidth;
};

/// Frequencies and bandwidths of the upper-half-plane LPC roots, filtered and
/// sorted by frequency.
inline std::vector<FormantCandidate> formant_candidates(std::span<const double> coeffs,
                                                        double sample_rate,
                                                        const FormantConfig& cfg) {
  std::vector<FormantCandidate> out;
  for (const auto& z : lpc_roots(coeffs)) {
    if (z.imag() <= 0.0) continue;
    const double f = std::arg(z) * sample_rate / (2.0 * std::numbers::pi);
    const double b = -(sample_rate / std::numbers::pi) * std::log(std::abs(z));
    if (b > cfg.max_bandwidth || f < cfg.min_frequency) continue;
    out.push_back({f, b});
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
  return out;
}

/// F1/F2 at `time` seconds: the neighbourhood is resampled to 2*max_formant,
/// pre-emphasised, Hamming-windowed and fitted with LPC; the two lowest
/// surviving root frequencies are returned.
inline FormantPair formants_at(const AudioBuffer& audio, double time, const FormantConfig& cfg = {}) {
  const double half = cfg.window / 2.0;
  if (time - half < 0.0 || time + half > audio.duration()) {
    fail("formants_at: window around t=", time, " s falls outside the audio (duration ",
         audio.duration(), " s)");
  }
  const int sr_out = static_cast<int>(std::lround(2.0 * cfg.max_formant));
  // Extract a margin wide enough for the resampling kernel, then resample.
  const double margin = 0.005;
  const double seg_start = std::max(0.0, time - half - margin);
  const double seg_end = std::min(audio.duration(), time + half + margin);
  const auto i0 = static_cast<std::size_t>(std::floor(seg_start * audio.sample_rate));
  const auto i1 = std::min(audio.samples.size(),
                           static_cast<std::size_t>(std::ceil(seg_end * audio.sample_rate)));
  std::span<const double> seg(audio.samples.data() + i0, i1 - i0);
  const auto y = resample(seg, audio.sample_rate, sr_out);
  const double seg_t0 = static_cast<double>(i0) / audio.sample_rate;

  const std::size_t n = seconds_to_samples(cfg.window, sr_out);
  const long centre = std::lround((time - seg_t0) * sr_out);
  const long first = std::max(0L, centre - static_cast<long>(n / 2));
  const std::size_t avail = y.size() > static_cast<std::size_t>(first) ? y.size() - first : 0;
  const std::size_t len = std::min(n, avail);
  if (len <= static_cast<std::size_t>(cfg.lpc_order) + 1) {
    fail("formants_at: analysis window too short");
  }

  const double alpha = std::exp(-2.0 * std::numbers::pi * cfg.preemphasis_from / sr_out);
  std::vector<double> frame(len);
  const double before = first > 0 ? y[first - 1] : y[first];
  for (std::size_t i = 0; i < len; ++i) {
    const double prev = i == 0 ? before : y[first + i - 1];
    frame[i] = y[first + i] - alpha * prev;
  }
  const auto w = hamming_window(len);
  for (std::size_t i = 0; i < len; ++i) frame[i] *= w[i];

  const auto model = lpc(frame, cfg.lpc_order);
  const auto cands = formant_candidates(model.coeffs, sr_out, cfg);
  if (cands.size() < 2) {
    throw UnmeasurableToken(detail::concat("formants_at: only ", cands.size(),
                                           " usable resonance(s) at t=", time, " s"));
  }
  FormantPair fp{cands[0].frequency, cands[1].frequency, cands[0].bandwidth, cands[1].bandwidth};
  if (!(fp.f1 > 0.0 && fp.f1 < fp.f2)) {
    throw UnmeasurableToken(detail::concat("formants_at: degenerate pair at t=", time, " s"));
  }
  return fp;
}

}  // namespace accent
