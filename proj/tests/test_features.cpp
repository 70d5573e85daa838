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

#include <cstring>
#include <filesystem>

#include <gtest/gtest.h>

#include "accent/features.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace accent;

namespace {

FeatureMatrix random_matrix(std::size_t t, std::size_t d, Rng& rng) {
  FeatureMatrix m(t, d);
  // Values representable in float32 so the round trip is exact.
  for (auto& v : m.data) v = static_cast<float>(rng.normal(0.0, 3.0));
  m.frame_hop = 0.02;
  m.source = FeatureSource::Embedding;
  m.speaker_id = "SPK" + std::to_string(rng.below(1000));
  m.city = CityLabel::named_cities()[rng.below(5)];
  m.metadata = {{"model_id", "test-model"}, {"layer", static_cast<int>(rng.below(13))}};
  return m;
}

// One speaker reading every inventory vowel once, each a 0.3 s oracle vowel.
// AA is always (500, 1500); other vowels get distinct targets.
struct Speaker {
  AudioBuffer audio;
  AlignmentTier tier;
};

Speaker oracle_speaker(const VowelInventory& inv, int aa_tokens, std::uint64_t seed) {
  Speaker s;
  s.audio.sample_rate = 16000;
  s.tier.tier_name = "phones";
  auto add = [&](const std::string& label, double f1, double f2) {
    const double start = s.audio.duration();
    oracle::Vowel v{{f1, f2}, {80.0, 90.0}};
    const auto x = oracle::vowel(v, seed++);
    s.audio.samples.insert(s.audio.samples.end(), x.begin(), x.end());
    s.tier.intervals.push_back({label, start, s.audio.duration(), inv.classify(label)});
  };
  int i = 0;
  for (const auto& e : inv.entries()) {
    if (e.phone == "AA") {
      for (int k = 0; k < aa_tokens; ++k) add("AA1", 500.0, 1500.0);
    } else {
      add(e.phone + "1", 350.0 + 15.0 * i, 1900.0 - 20.0 * i);
    }
    ++i;
  }
  return s;
}

}  // namespace

TEST(MeasurementTimes, MidpointAndTwentyEighty) {
  const PhoneInterval iv{"X", 0.10, 0.30};
  const auto mono = measurement_times(iv, VowelClass::Monophthong);
  ASSERT_EQ(mono.size(), 1u);
  EXPECT_NEAR(mono[0], 0.20, 1e-12);
  const auto diph = measurement_times(iv, VowelClass::Diphthong);
  ASSERT_EQ(diph.size(), 2u);
  EXPECT_NEAR(diph[0], 0.14, 1e-12);
  EXPECT_NEAR(diph[1], 0.26, 1e-12);
  EXPECT_TRUE(measurement_times(iv, VowelClass::NotVowel).empty());
}

TEST(FormantVector, RecoversKnownVowelSlots) {
  const auto& inv = VowelInventory::default_inventory();
  const auto sp = oracle_speaker(inv, 3, 100);
  const Recording rec{"S1", CityLabel::Kind::Leeds, "s1.wav", std::nullopt, 16000, sp.audio.duration()};
  const auto v = build_formant_vector(rec, sp.audio, sp.tier, inv);
  ASSERT_EQ(v.values.size(), 60u);
  const auto* aa = inv.find("AA");
  EXPECT_NEAR(v.values[aa->slots[0]], 500.0, 50.0);
  EXPECT_NEAR(v.values[aa->slots[1]], 1500.0, 75.0);
  EXPECT_LE(v.coverage[aa->slots[0]], 3u);
  EXPECT_EQ(v.coverage[aa->slots[0]], v.coverage[aa->slots[1]]);
  for (std::size_t s = 0; s < 60; ++s) EXPECT_GE(v.coverage[s], 1u) << s;
  // Median and mean agree when every token measures the same vowel.
  const auto med = build_formant_vector(rec, sp.audio, sp.tier, inv, {}, SlotAggregate::Median);
  EXPECT_NEAR(med.values[aa->slots[0]], v.values[aa->slots[0]], 30.0);
}

TEST(FormantVector, EmptySlotNamesThePhone) {
  const auto& inv = VowelInventory::default_inventory();
  auto sp = oracle_speaker(inv, 1, 7);
  std::erase_if(sp.tier.intervals, [](const PhoneInterval& iv) { return iv.label == "OY1"; });
  const Recording rec{"S2", CityLabel::Kind::Leeds, "s2.wav", std::nullopt, 16000, 0.0};
  try {
    build_formant_vector(rec, sp.audio, sp.tier, inv);
    FAIL() << "expected a coverage error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("OY"), std::string::npos);
  }
}

TEST(Scaler, TwoPointArithmetic) {
  const auto s = fit_scaler(std::vector<std::vector<double>>{{0, 10}, {2, 30}});
  EXPECT_DOUBLE_EQ(s.means[0], 1.0);
  EXPECT_DOUBLE_EQ(s.means[1], 20.0);
  EXPECT_DOUBLE_EQ(s.stds[0], 1.0);
  EXPECT_DOUBLE_EQ(s.stds[1], 10.0);
  const auto z = s.apply(std::vector<double>{2, 30});
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_DOUBLE_EQ(z[1], 1.0);
}

TEST(Scaler, StandardizesItsFittingSet) {
  Rng rng(4);
  std::vector<std::vector<double>> v(50, std::vector<double>(7));
  for (auto& row : v) {
    for (std::size_t d = 0; d < 7; ++d) row[d] = rng.normal(d * 10.0, d + 0.5);
  }
  const auto s = fit_scaler(v);
  std::vector<double> mean(7, 0.0), sq(7, 0.0);
  for (const auto& row : v) {
    const auto z = s.apply(row);
    for (std::size_t d = 0; d < 7; ++d) {
      mean[d] += z[d] / 50.0;
      sq[d] += z[d] * z[d] / 50.0;
    }
  }
  for (std::size_t d = 0; d < 7; ++d) {
    EXPECT_NEAR(mean[d], 0.0, 1e-9);
    EXPECT_NEAR(sq[d], 1.0, 1e-9);
  }
}

TEST(Scaler, ConstantColumnIsAnError) {
  EXPECT_THROW(fit_scaler(std::vector<std::vector<double>>{{1, 5}, {2, 5}, {3, 5}}), Error);
  EXPECT_THROW(fit_scaler(std::vector<std::vector<double>>{{1, 5}}), Error);
}

TEST(Segment, FloorDivision) {
  FeatureMatrix m(846, 3);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<double>(i);
  m.speaker_id = "A";
  const auto s = segment_chunks(m, 200);
  ASSERT_EQ(s.samples.size(), 4u);
  EXPECT_EQ(s.dim(), 600u);
  // Chunk c holds frames 200c..200c+199, flattened frame-major.
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(s.samples[c].chunk_index, c);
    EXPECT_DOUBLE_EQ(s.samples[c].vector[0], static_cast<double>(c * 600));
    EXPECT_DOUBLE_EQ(s.samples[c].vector[599], static_cast<double>(c * 600 + 599));
  }
  EXPECT_EQ(segment_chunks(FeatureMatrix(200, 3), 200).samples.size(), 1u);
  const auto short_one = segment_chunks(m, 900);
  EXPECT_TRUE(short_one.samples.empty());
  ASSERT_EQ(short_one.short_recordings.size(), 1u);
  EXPECT_EQ(short_one.short_recordings[0], "A");
  EXPECT_THROW(segment_chunks(m, 0), UsageError);
}

// Chunks never straddle recordings and every sample carries its speaker.
TEST(Segment, ChunkCountsAcrossRecordings) {
  Rng rng(2);
  std::vector<FeatureMatrix> mats;
  std::size_t expected = 0;
  for (int r = 0; r < 20; ++r) {
    FeatureMatrix m(rng.below(500) + 1, 4);
    m.speaker_id = "R" + std::to_string(r);
    expected += m.rows / 37;
    mats.push_back(std::move(m));
  }
  const auto set = segment_all(mats, 37, FeatureKind::Mfcc);
  EXPECT_EQ(set.samples.size(), expected);
  for (const auto& s : set.samples) {
    EXPECT_FALSE(s.speaker_id.empty());
    EXPECT_EQ(s.vector.size(), 37u * 4u);
  }
}

TEST(FeatureKind, Parse) {
  EXPECT_EQ(parse_feature_kind("mfcc"), FeatureKind::Mfcc);
  EXPECT_EQ(parse_feature_kind("formants"), FeatureKind::Formant);
  EXPECT_EQ(parse_feature_kind("embedding"), FeatureKind::Embedding);
  EXPECT_THROW(parse_feature_kind("plp"), UsageError);
}

TEST(Embedding, RoundTripIsBitExact) {
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    const std::size_t t = i == 0 ? 1 : rng.below(60) + 1;
    const std::size_t d = i == 1 ? 1 : rng.below(40) + 1;
    const auto m = random_matrix(t, d, rng);
    const auto bytes = encode_embedding(m);
    const auto back = decode_embedding(bytes);
    ASSERT_EQ(back.rows, t);
    ASSERT_EQ(back.cols, d);
    EXPECT_EQ(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(double)), 0);
    EXPECT_EQ(back.speaker_id, m.speaker_id);
    EXPECT_EQ(back.city, m.city);
    EXPECT_EQ(back.frame_hop, m.frame_hop);
    EXPECT_EQ(back.metadata["layer"], m.metadata["layer"]);
    EXPECT_EQ(encode_embedding(back), bytes);
  }
}

TEST(Embedding, SizeIsTwentyPlusHeaderPlusPayload) {
  Rng rng(1);
  const auto m = random_matrix(100, 768, rng);
  const auto bytes = encode_embedding(m);
  std::uint32_t hlen;
  std::memcpy(&hlen, bytes.data() + 8, 4);
  EXPECT_EQ(bytes.size(), 20u + hlen + 4u * 100u * 768u);
  const auto dir = fs::temp_directory_path() / "accent_test_emb";
  fs::create_directories(dir);
  write_embedding_file(m, dir / "x.accemb");
  const auto back = read_embedding_file(dir / "x.accemb");
  EXPECT_EQ(back.rows, 100u);
  EXPECT_EQ(back.cols, 768u);
}

TEST(Embedding, EncodeRequiresProvenance) {
  Rng rng(1);
  auto m = random_matrix(2, 2, rng);
  m.metadata.erase("model_id");
  EXPECT_THROW(encode_embedding(m), Error);
  m = random_matrix(2, 2, rng);
  m.metadata.erase("layer");
  EXPECT_THROW(encode_embedding(m), Error);
}

TEST(Embedding, CorruptionIsRejected) {
  Rng rng(5);
  const auto m = random_matrix(3, 4, rng);
  const std::string good = encode_embedding(m);
  std::uint32_t hlen;
  std::memcpy(&hlen, good.data() + 8, 4);
  auto set32 = [](std::string s, std::size_t at, std::uint32_t v) {
    std::memcpy(s.data() + at, &v, 4);
    return s;
  };
  auto header_with = [&](const std::string& json) {
    std::string s(good.substr(0, 8));
    std::uint32_t n = static_cast<std::uint32_t>(json.size());
    s.append(reinterpret_cast<const char*>(&n), 4);
    s += json;
    s += good.substr(12 + hlen);
    return s;
  };
  std::string bad_magic = good;
  bad_magic[7] = '2';
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"bad magic", bad_magic},
      {"empty", ""},
      {"truncated payload", good.substr(0, good.size() - 3)},
      {"trailing bytes", good + "xx"},
      {"header length past end", set32(good, 8, 1u << 30)},
      {"zero frames", set32(good, 12 + hlen, 0)},
      {"zero dims", set32(good, 16 + hlen, 0)},
      {"dims disagree with length", set32(good, 16 + hlen, 5)},
      {"non-finite value", set32(good, 20 + hlen, 0x7FC00000u)},
      {"infinite value", set32(good, 24 + hlen, 0x7F800000u)},
      {"header not JSON", header_with(std::string(hlen, '{'))},
      {"header not object", header_with("[1,2,3]")},
      {"missing model_id",
       header_with(R"({"speaker_id":"A","city":"Leeds","layer":1,"frame_hop_seconds":0.02})")},
      {"missing frame hop", header_with(R"({"speaker_id":"A","city":"Leeds","model_id":"m","layer":1})")},
      {"speaker not string",
       header_with(R"({"speaker_id":3,"city":"Leeds","model_id":"m","layer":1,"frame_hop_seconds":0.02})")},
  };
  for (const auto& [what, bytes] : cases) EXPECT_THROW(decode_embedding(bytes), Error) << what;
  EXPECT_NO_THROW(decode_embedding(good));
}
