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

// Corpus inputs: city labels, manifests, WAV decoding and phone alignments
// (Praat TextGrid or plain CSV).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "accent/error.hpp"
#include "accent/inventory.hpp"
#include "accent/util.hpp"

namespace accent {

// ---------------------------------------------------------------------------
// City labels

class CityLabel {
 public:
  enum class Kind { Leeds, Liverpool, Manchester, Newcastle, Sheffield, Other };

  static constexpr std::array<Kind, 5> kNamed = {Kind::Leeds, Kind::Liverpool, Kind::Manchester,
                                                 Kind::Newcastle, Kind::Sheffield};

  CityLabel() = default;
  /* implicit */ CityLabel(Kind k) : kind_(k) {
    if (k == Kind::Other) fail("CityLabel: Other requires a tag");
  }

  /// Exact, case-sensitive match against the five names; anything else is
  /// Other(tag). parse(to_string(c)) == c for every label.
  static CityLabel parse(std::string_view name) {
    for (Kind k : kNamed) {
      if (name == named(k)) return CityLabel(k);
    }
    CityLabel c;
    c.kind_ = Kind::Other;
    c.tag_ = std::string(name);
    return c;
  }

  static CityLabel other(std::string_view tag) { return parse(tag); }

  Kind kind() const { return kind_; }
  bool is_other() const { return kind_ == Kind::Other; }

  std::string to_string() const { return is_other() ? tag_ : std::string(named(kind_)); }

  friend bool operator==(const CityLabel& a, const CityLabel& b) {
    return a.kind_ == b.kind_ && a.tag_ == b.tag_;
  }
  friend bool operator<(const CityLabel& a, const CityLabel& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    return a.tag_ < b.tag_;
  }

  static std::vector<CityLabel> named_cities() {
    return {Kind::Leeds, Kind::Liverpool, Kind::Manchester, Kind::Newcastle, Kind::Sheffield};
  }

 private:
  static std::string_view named(Kind k) {
    switch (k) {
      case Kind::Leeds: return "Leeds";
      case Kind::Liverpool: return "Liverpool";
      case Kind::Manchester: return "Manchester";
      case Kind::Newcastle: return "Newcastle";
      case Kind::Sheffield: return "Sheffield";
      case Kind::Other: break;
    }
    return "";
  }

  Kind kind_ = Kind::Leeds;
  std::string tag_;
};

// ---------------------------------------------------------------------------
// Audio

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

enum class WavEncoding { Pcm8, Pcm16, Pcm24, Float32 };

struct WavInfo {
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  bool is_float = false;
  std::size_t n_frames = 0;
  std::size_t data_offset = 0;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}
inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

}  // namespace detail

/// Parses RIFF/WAVE headers without decoding samples.
inline WavInfo parse_wav_header(std::string_view bytes, const std::string& name = "<memory>") {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0) {
    fail("wav ", name, ": not a RIFF/WAVE file (or truncated header)");
  }
  WavInfo info;
  bool have_fmt = false, have_data = false;
  int format = 0;
  std::size_t pos = 12;
  while (pos + 8 <= n) {
    const std::uint32_t size = detail::le32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(p + pos, "fmt ", 4) == 0) {
      if (size < 16 || body + size > n) fail("wav ", name, ": truncated fmt chunk");
      format = detail::le16(p + body);
      info.channels = detail::le16(p + body + 2);
      info.sample_rate = static_cast<int>(detail::le32(p + body + 4));
      info.bits = detail::le16(p + body + 14);
      if (format == 0xFFFE) {
        if (size < 26) fail("wav ", name, ": truncated extensible fmt chunk");
        format = detail::le16(p + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(p + pos, "data", 4) == 0) {
      if (!have_fmt) fail("wav ", name, ": data chunk before fmt chunk");
      if (body + size > n) fail("wav ", name, ": truncated file (data chunk claims ", size,
                                " bytes, ", n - body, " present)");
      info.data_offset = body;
      const int width = info.bits / 8;
      if (width <= 0 || info.channels <= 0) fail("wav ", name, ": invalid fmt chunk");
      info.n_frames = size / (static_cast<std::size_t>(width) * info.channels);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) fail("wav ", name, ": missing fmt chunk (truncated?)");
  if (!have_data) fail("wav ", name, ": missing data chunk (truncated?)");
  if (format == 1) {
    if (info.bits != 8 && info.bits != 16 && info.bits != 24) {
      fail("wav ", name, ": unsupported PCM bit depth ", info.bits);
    }
  } else if (format == 3) {
    if (info.bits != 32) fail("wav ", name, ": unsupported float bit depth ", info.bits);
    info.is_float = true;
  } else {
    fail("wav ", name, ": unsupported encoding (format tag ", format, ")");
  }
  if (info.sample_rate <= 0) fail("wav ", name, ": invalid sample rate");
  return info;
}

/// Decodes mono PCM (8/16/24-bit) or float32 WAV. Integer samples are divided
/// by 2^(bits-1); 8-bit data is unsigned with offset 128.
inline AudioBuffer decode_wav(std::string_view bytes, const std::string& name = "<memory>") {
  const WavInfo info = parse_wav_header(bytes, name);
  if (info.channels != 1) {
    fail("wav ", name, ": ", info.channels, " channels; only mono is accepted, downmix first");
  }
  if (info.n_frames == 0) fail("wav ", name, ": no samples");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + info.data_offset;
  AudioBuffer buf;
  buf.sample_rate = info.sample_rate;
  buf.samples.resize(info.n_frames);
  for (std::size_t i = 0; i < info.n_frames; ++i) {
    double v = 0.0;
    if (info.is_float) {
      const std::uint32_t raw = detail::le32(p + 4 * i);
      float f;
      std::memcpy(&f, &raw, 4);
      if (!std::isfinite(f)) fail("wav ", name, ": non-finite sample at index ", i);
      v = std::clamp(static_cast<double>(f), -1.0, 1.0);
    } else if (info.bits == 8) {
      v = (static_cast<int>(p[i]) - 128) / 128.0;
    } else if (info.bits == 16) {
      v = static_cast<std::int16_t>(detail::le16(p + 2 * i)) / 32768.0;
    } else {
      const unsigned char* q = p + 3 * i;
      std::int32_t x = q[0] | q[1] << 8 | q[2] << 16;
      if (x & 0x800000) x -= 0x1000000;
      v = x / 8388608.0;
    }
    buf.samples[i] = v;
  }
  return buf;
}

inline AudioBuffer read_wav(const std::filesystem::path& path) {
  return decode_wav(read_file(path), path.string());
}

/// Mono WAV encoder. Integer encodings round to the nearest code and clip.
inline std::string encode_wav(const AudioBuffer& audio, WavEncoding enc = WavEncoding::Pcm16) {
  const int bits = enc == WavEncoding::Pcm8 ? 8 : enc == WavEncoding::Pcm16 ? 16
                   : enc == WavEncoding::Pcm24 ? 24 : 32;
  const int width = bits / 8;
  const std::size_t data_size = audio.samples.size() * width;
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_le(out, 36 + data_size, 4);
  out += "WAVEfmt ";
  detail::put_le(out, 16, 4);
  detail::put_le(out, enc == WavEncoding::Float32 ? 3 : 1, 2);
  detail::put_le(out, 1, 2);
  detail::put_le(out, audio.sample_rate, 4);
  detail::put_le(out, static_cast<std::uint64_t>(audio.sample_rate) * width, 4);
  detail::put_le(out, width, 2);
  detail::put_le(out, bits, 2);
  out += "data";
  detail::put_le(out, data_size, 4);
  auto quant = [](double x, double scale, double lo, double hi) {
    return static_cast<std::int64_t>(std::clamp(std::round(x * scale), lo, hi));
  };
  for (double x : audio.samples) {
    switch (enc) {
      case WavEncoding::Pcm8:
        detail::put_le(out, static_cast<std::uint64_t>(quant(x, 128, -128, 127) + 128), 1);
        break;
      case WavEncoding::Pcm16:
        detail::put_le(out, static_cast<std::uint64_t>(quant(x, 32768, -32768, 32767)), 2);
        break;
      case WavEncoding::Pcm24:
        detail::put_le(out, static_cast<std::uint64_t>(quant(x, 8388608, -8388608, 8388607)), 3);
        break;
      case WavEncoding::Float32: {
        const float f = static_cast<float>(x);
        std::uint32_t raw;
        std::memcpy(&raw, &f, 4);
        detail::put_le(out, raw, 4);
        break;
      }
    }
  }
  return out;
}

inline void write_wav(const AudioBuffer& audio, const std::filesystem::path& path,
                      WavEncoding enc = WavEncoding::Pcm16) {
  write_file_atomic(path, encode_wav(audio, enc));
}

// ---------------------------------------------------------------------------
// Alignments

struct PhoneInterval {
  std::string label;
  double start = 0.0;
  double end = 0.0;
  VowelClass vowel_class = VowelClass::NotVowel;

  double duration() const { return end - start; }
  friend bool operator==(const PhoneInterval&, const PhoneInterval&) = default;
};

struct AlignmentTier {
  std::string tier_name;
  std::vector<PhoneInterval> intervals;

  friend bool operator==(const AlignmentTier&, const AlignmentTier&) = default;
};

inline constexpr double kAlignmentTolerance = 1e-6;

/// Enforces the tier invariants: start >= 0, start < end, sorted, no overlap
/// beyond kAlignmentTolerance.
inline void validate_tier(const AlignmentTier& tier) {
  for (std::size_t i = 0; i < tier.intervals.size(); ++i) {
    const auto& iv = tier.intervals[i];
    if (iv.start < 0.0) fail("alignment: interval ", i + 1, " starts before 0");
    if (!(iv.start < iv.end)) {
      fail("alignment: interval ", i + 1, " ('", iv.label, "') has start ", iv.start,
           " >= end ", iv.end);
    }
    if (i > 0) {
      const auto& prev = tier.intervals[i - 1];
      if (iv.start < prev.start) fail("alignment: interval ", i + 1, " is out of time order");
      if (iv.start < prev.end - kAlignmentTolerance) {
        fail("alignment: interval ", i + 1, " overlaps interval ", i);
      }
    }
  }
}

namespace detail {

struct TgToken {
  enum Kind { Number, String, Flag } kind;
  std::string text;
  double number = 0.0;
  int line = 0;
};

// Praat text files are a stream of numbers, quoted strings and <flags>; the
// long form adds `key =` labels and `[n]:` indices which carry no data. Both
// forms reduce to the same token stream once those are skipped.
inline std::vector<TgToken> tokenize_textgrid(std::string_view text) {
  std::vector<TgToken> out;
  int line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '!') {
      while (i < n && text[i] != '\n') ++i;
    } else if (c == '"') {
      const int start_line = line;
      std::string s;
      ++i;
      for (;;) {
        if (i >= n) fail("TextGrid line ", start_line, ": unterminated string");
        if (text[i] == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            s += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (text[i] == '\n') ++line;
        s += text[i++];
      }
      out.push_back({TgToken::String, std::move(s), 0.0, start_line});
    } else if (c == '<') {
      const std::size_t e = text.find('>', i);
      if (e == std::string_view::npos) fail("TextGrid line ", line, ": unterminated flag");
      out.push_back({TgToken::Flag, std::string(text.substr(i + 1, e - i - 1)), 0.0, line});
      i = e + 1;
    } else if (c == '[') {
      // Index such as "[1]" or "[]": no data.
      while (i < n && text[i] != ']' && text[i] != '\n') ++i;
      if (i < n && text[i] == ']') ++i;
      if (i < n && text[i] == ':') ++i;
    } else {
      std::size_t e = i;
      while (e < n && !std::isspace(static_cast<unsigned char>(text[e])) && text[e] != '"' &&
             text[e] != '[' && text[e] != '<') {
        ++e;
      }
      std::string word(text.substr(i, e - i));
      i = e;
      const char f = word[0];
      const bool numeric_start = std::isdigit(static_cast<unsigned char>(f)) || f == '-' ||
                                 f == '+' || (f == '.' && word.size() > 1);
      if (numeric_start) {
        double v;
        if (!parse_double(word, v)) {
          fail("TextGrid line ", line, ": malformed numeric field '", word, "'");
        }
        out.push_back({TgToken::Number, std::move(word), v, line});
      }
      // Anything else ("xmin", "=", "intervals:", "class") is a label.
    }
  }
  return out;
}

class TgCursor {
 public:
  explicit TgCursor(std::vector<TgToken> toks) : toks_(std::move(toks)) {}

  bool done() const { return pos_ >= toks_.size(); }

  const TgToken& next(TgToken::Kind want, const char* what) {
    if (done()) fail("TextGrid: unexpected end of file while reading ", what);
    const TgToken& t = toks_[pos_++];
    if (t.kind != want) {
      fail("TextGrid line ", t.line, ": expected ", what, ", found '", t.text, "'");
    }
    return t;
  }
  double number(const char* what) { return next(TgToken::Number, what).number; }
  std::string string(const char* what) { return next(TgToken::String, what).text; }
  int line() const { return done() ? -1 : toks_[pos_].line; }

  std::size_t count(const char* what) {
    const TgToken& t = next(TgToken::Number, what);
    if (t.number < 0 || t.number != std::floor(t.number)) {
      fail("TextGrid line ", t.line, ": ", what, " must be a non-negative integer");
    }
    return static_cast<std::size_t>(t.number);
  }

 private:
  std::vector<TgToken> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads one IntervalTier out of a Praat TextGrid (long or short text form).
/// Vowel classes come from `inventory`; labels it does not list are NotVowel.
inline AlignmentTier parse_textgrid(std::string_view text, std::string_view tier_name,
                                    const VowelInventory& inventory =
                                        VowelInventory::default_inventory()) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  detail::TgCursor cur(detail::tokenize_textgrid(text));
  if (cur.string("file type") != "ooTextFile") fail("TextGrid: missing ooTextFile header");
  if (cur.string("object class") != "TextGrid") fail("TextGrid: object class is not TextGrid");
  cur.number("xmin");
  cur.number("xmax");
  cur.next(detail::TgToken::Flag, "tiers flag");
  const std::size_t n_tiers = cur.count("tier count");
  std::vector<std::string> seen;
  for (std::size_t t = 0; t < n_tiers; ++t) {
    const std::string cls = cur.string("tier class");
    const std::string name = cur.string("tier name");
    cur.number("tier xmin");
    cur.number("tier xmax");
    const std::size_t n_items = cur.count("item count");
    const bool wanted = cls == "IntervalTier" && name == tier_name;
    AlignmentTier tier;
    tier.tier_name = name;
    for (std::size_t k = 0; k < n_items; ++k) {
      if (cls == "IntervalTier") {
        const int line = cur.line();
        const double xmin = cur.number("interval xmin");
        const double xmax = cur.number("interval xmax");
        std::string label = cur.string("interval text");
        if (wanted && !(xmin < xmax)) {
          fail("TextGrid line ", line, ": interval ", k + 1, " has xmin ", xmin, " >= xmax ", xmax);
        }
        if (wanted) {
          const VowelClass vc =
              trim(label).empty() ? VowelClass::NotVowel : inventory.classify(label);
          tier.intervals.push_back({std::move(label), xmin, xmax, vc});
        }
      } else if (cls == "TextTier") {
        cur.number("point time");
        cur.string("point mark");
      } else {
        fail("TextGrid: unknown tier class '", cls, "'");
      }
    }
    if (wanted) {
      validate_tier(tier);
      return tier;
    }
    seen.push_back(name);
  }
  std::string names;
  for (const auto& s : seen) names += (names.empty() ? "" : ", ") + s;
  fail("TextGrid: interval tier '", tier_name, "' not found (tiers: ", names, ")");
}

namespace detail {

/// Converts UTF-16 (with BOM) to UTF-8; passes anything else through.
inline std::string utf16_to_utf8_if_needed(const std::string& raw) {
  if (raw.size() < 2) return raw;
  const auto b0 = static_cast<unsigned char>(raw[0]), b1 = static_cast<unsigned char>(raw[1]);
  const bool le = b0 == 0xFF && b1 == 0xFE, be = b0 == 0xFE && b1 == 0xFF;
  if (!le && !be) return raw;
  std::string out;
  auto unit = [&](std::size_t i) -> std::uint32_t {
    const auto a = static_cast<unsigned char>(raw[i]), b = static_cast<unsigned char>(raw[i + 1]);
    return le ? (a | b << 8) : (b | a << 8);
  };
  for (std::size_t i = 2; i + 1 < raw.size(); i += 2) {
    std::uint32_t cp = unit(i);
    if (cp >= 0xD800 && cp < 0xDC00 && i + 3 < raw.size()) {
      const std::uint32_t lo = unit(i + 2);
      cp = 0x10000 + ((cp - 0xD800) << 10) + (lo - 0xDC00);
      i += 2;
    }
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | cp >> 6);
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | cp >> 12);
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | cp >> 18);
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

}  // namespace detail

/// Alignment CSV: `label,start,end` in seconds; the header row is optional.
inline AlignmentTier parse_alignment_csv(std::string_view text, std::string_view tier_name = "",
                                         const VowelInventory& inventory =
                                             VowelInventory::default_inventory()) {
  AlignmentTier tier;
  tier.tier_name = std::string(tier_name);
  const auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    auto f = split_csv_line(lines[ln]);
    if (f.size() == 3 && f[0] == "label" && f[1] == "start" && f[2] == "end") continue;
    if (f.size() != 3) fail("alignment CSV line ", ln + 1, ": expected label,start,end");
    double s, e;
    if (!parse_double(f[1], s) || !parse_double(f[2], e)) {
      fail("alignment CSV line ", ln + 1, ": malformed time");
    }
    if (!(s < e)) fail("alignment CSV line ", ln + 1, ": start ", s, " >= end ", e);
    if (!tier.intervals.empty()) {
      const auto& prev = tier.intervals.back();
      if (s < prev.end - kAlignmentTolerance) {
        fail("alignment CSV line ", ln + 1, ": rows are not monotone in time");
      }
    }
    const VowelClass vc = f[0].empty() ? VowelClass::NotVowel : inventory.classify(f[0]);
    tier.intervals.push_back({f[0], s, e, vc});
  }
  validate_tier(tier);
  return tier;
}

inline std::string alignment_to_csv(const AlignmentTier& tier) {
  std::string out = "label,start,end\n";
  char buf[64];
  for (const auto& iv : tier.intervals) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", iv.start, iv.end);
    out += csv_escape(iv.label) + buf;
  }
  return out;
}

/// Short-form TextGrid with a single interval tier.
inline std::string alignment_to_textgrid(const AlignmentTier& tier, double xmax) {
  std::string out = "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "0\n%.17g\n<exists>\n1\n", xmax);
  out += buf;
  out += "\"IntervalTier\"\n\"" + tier.tier_name + "\"\n";
  std::snprintf(buf, sizeof buf, "0\n%.17g\n%zu\n", xmax, tier.intervals.size());
  out += buf;
  for (const auto& iv : tier.intervals) {
    std::snprintf(buf, sizeof buf, "%.17g\n%.17g\n", iv.start, iv.end);
    out += buf;
    std::string label;
    for (char c : iv.label) {
      if (c == '"') label += '"';
      label += c;
    }
    out += "\"" + label + "\"\n";
  }
  return out;
}

/// Loads an alignment file, choosing the parser by extension (.csv or TextGrid).
inline AlignmentTier read_alignment(const std::filesystem::path& path, std::string_view tier_name,
                                    const VowelInventory& inventory =
                                        VowelInventory::default_inventory()) {
  const std::string text = detail::utf16_to_utf8_if_needed(read_file(path));
  try {
    if (path.extension() == ".csv") return parse_alignment_csv(text, tier_name, inventory);
    return parse_textgrid(text, tier_name, inventory);
  } catch (const Error& e) {
    fail(path.string(), ": ", e.what());
  }
}

// ---------------------------------------------------------------------------
// Manifest

struct Recording {
  std::string speaker_id;
  CityLabel city;
  std::filesystem::path audio_path;
  std::optional<std::filesystem::path> alignment_path;
  int sample_rate = 0;    // filled by probe_audio
  double duration = 0.0;  // seconds, filled by probe_audio
};

struct Corpus {
  std::vector<Recording> recordings;
  std::map<CityLabel, std::size_t> city_counts;

  std::size_t count(const CityLabel& c) const {
    auto it = city_counts.find(c);
    return it == city_counts.end() ? 0 : it->second;
  }
};

/// Parses manifest CSV text. Relative paths resolve against `base_dir`.
inline Corpus parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {}) {
  Corpus corpus;
  const auto lines = split_lines(text);
  if (lines.empty()) fail("manifest: missing header");
  const auto header = split_csv_line(lines[0]);
  const std::vector<std::string> want = {"speaker_id", "city", "audio_path", "alignment_path"};
  if (header != want) fail("manifest: header must be speaker_id,city,audio_path,alignment_path");
  std::set<std::string> ids;
  for (const auto& c : CityLabel::named_cities()) corpus.city_counts[c] = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    auto f = split_csv_line(lines[ln]);
    if (f.size() != 4) fail("manifest row ", ln + 1, ": expected 4 fields, got ", f.size());
    if (f[0].empty()) fail("manifest row ", ln + 1, ": empty speaker_id");
    if (f[1].empty()) fail("manifest row ", ln + 1, ": empty city");
    if (f[2].empty()) fail("manifest row ", ln + 1, ": empty audio_path");
    if (!ids.insert(f[0]).second) fail("manifest row ", ln + 1, ": duplicate speaker_id '", f[0], "'");
    Recording r;
    r.speaker_id = f[0];
    r.city = CityLabel::parse(f[1]);
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    r.audio_path = resolve(f[2]);
    if (!f[3].empty()) r.alignment_path = resolve(f[3]);
    ++corpus.city_counts[r.city];
    corpus.recordings.push_back(std::move(r));
  }
  return corpus;
}

inline Corpus load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail("manifest not found: ", path.string());
  try {
    return parse_manifest(read_file(path), path.parent_path());
  } catch (const Error& e) {
    fail(path.string(), ": ", e.what());
  }
}

/// Fills sample_rate and duration for every recording from its WAV header.
inline void probe_audio(Corpus& corpus) {
  for (auto& r : corpus.recordings) {
    const WavInfo info = parse_wav_header(read_file(r.audio_path), r.audio_path.string());
    if (info.n_frames == 0) fail("wav ", r.audio_path.string(), ": no samples");
    r.sample_rate = info.sample_rate;
    r.duration = static_cast<double>(info.n_frames) / info.sample_rate;
  }
}

inline std::string manifest_to_csv(const Corpus& corpus) {
  std::string out = "speaker_id,city,audio_path,alignment_path\n";
  for (const auto& r : corpus.recordings) {
    out += csv_escape(r.speaker_id) + "," + csv_escape(r.city.to_string()) + "," +
           csv_escape(r.audio_path.generic_string()) + "," +
           (r.alignment_path ? csv_escape(r.alignment_path->generic_string()) : "") + "\n";
  }
  return out;
}

}  // namespace accent
