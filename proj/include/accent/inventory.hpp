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

// Vowel inventory: which phones are measured and where each measurement lands
// in the 60-slot formant speaker vector.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "accent/error.hpp"
#include "accent/util.hpp"

namespace accent {

enum class VowelClass { Monophthong, Diphthong, NotVowel };

inline std::string_view to_string(VowelClass c) {
  switch (c) {
    case VowelClass::Monophthong: return "monophthong";
    case VowelClass::Diphthong: return "diphthong";
    case VowelClass::NotVowel: return "not_vowel";
  }
  return "?";
}

/// ARPAbet stress markers are trailing digits ("AA1" -> "AA").
inline std::string strip_stress(std::string_view phone) {
  std::string s(trim(phone));
  while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.back()))) s.pop_back();
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

struct VowelEntry {
  std::string phone;
  VowelClass vowel_class = VowelClass::Monophthong;
  // Monophthong: {F1 mid, F2 mid}.
  // Diphthong: {F1 onglide, F2 onglide, F1 offglide, F2 offglide}.
  std::vector<int> slots;
};

class VowelInventory {
 public:
  static constexpr int kSlots = 60;

  VowelInventory() = default;

  /// Validates that slots tile 0..59 exactly once.
  explicit VowelInventory(std::vector<VowelEntry> entries) : entries_(std::move(entries)) {
    std::vector<int> seen(kSlots, 0);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& e = entries_[i];
      e.phone = strip_stress(e.phone);
      if (e.phone.empty()) fail("vowel inventory: empty phone in entry ", i);
      if (index_.count(e.phone)) fail("vowel inventory: duplicate phone ", e.phone);
      const std::size_t want = e.vowel_class == VowelClass::Monophthong ? 2
                               : e.vowel_class == VowelClass::Diphthong ? 4
                                                                        : 0;
      if (want == 0) fail("vowel inventory: phone ", e.phone, " must be a monophthong or diphthong");
      if (e.slots.size() != want) {
        fail("vowel inventory: phone ", e.phone, " needs ", want, " slots, got ", e.slots.size());
      }
      for (int s : e.slots) {
        if (s < 0 || s >= kSlots) fail("vowel inventory: slot ", s, " out of range for ", e.phone);
        if (seen[s]++) fail("vowel inventory: slot ", s, " assigned twice");
      }
      index_[e.phone] = i;
    }
    for (int s = 0; s < kSlots; ++s) {
      if (!seen[s]) fail("vowel inventory: slot ", s, " is not assigned");
    }
  }

  const std::vector<VowelEntry>& entries() const { return entries_; }

  const VowelEntry* find(std::string_view phone) const {
    auto it = index_.find(strip_stress(phone));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  VowelClass classify(std::string_view phone) const {
    const auto* e = find(phone);
    return e ? e->vowel_class : VowelClass::NotVowel;
  }

  /// Human-readable names per slot, e.g. "AA_F1_mid", "AY_F2_off".
  std::vector<std::string> slot_names() const {
    std::vector<std::string> names(kSlots);
    for (const auto& e : entries_) {
      if (e.vowel_class == VowelClass::Monophthong) {
        names[e.slots[0]] = e.phone + "_F1_mid";
        names[e.slots[1]] = e.phone + "_F2_mid";
      } else {
        names[e.slots[0]] = e.phone + "_F1_on";
        names[e.slots[1]] = e.phone + "_F2_on";
        names[e.slots[2]] = e.phone + "_F1_off";
        names[e.slots[3]] = e.phone + "_F2_off";
      }
    }
    return names;
  }

  /// CSV form: `phone,class,slot0,slot1[,slot2,slot3]` with a header row.
  static VowelInventory from_csv(std::string_view text) {
    std::vector<VowelEntry> entries;
    const auto lines = split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (trim(lines[ln]).empty()) continue;
      auto f = split_csv_line(lines[ln]);
      if (ln == 0 && f[0] == "phone") continue;
      if (f.size() < 4) fail("vowel inventory line ", ln + 1, ": expected phone,class,slots...");
      VowelEntry e;
      e.phone = f[0];
      if (f[1] == "monophthong") {
        e.vowel_class = VowelClass::Monophthong;
      } else if (f[1] == "diphthong") {
        e.vowel_class = VowelClass::Diphthong;
      } else {
        fail("vowel inventory line ", ln + 1, ": unknown class '", f[1], "'");
      }
      for (std::size_t k = 2; k < f.size(); ++k) {
        double v;
        if (!parse_double(f[k], v) || v != static_cast<int>(v)) {
          fail("vowel inventory line ", ln + 1, ": bad slot '", f[k], "'");
        }
        e.slots.push_back(static_cast<int>(v));
      }
      entries.push_back(std::move(e));
    }
    return VowelInventory(std::move(entries));
  }

  std::string to_csv() const {
    std::string out = "phone,class,slot0,slot1,slot2,slot3\n";
    for (const auto& e : entries_) {
      out += e.phone + "," + std::string(to_string(e.vowel_class));
      for (int s : e.slots) out += "," + std::to_string(s);
      out += "\n";
    }
    return out;
  }

  /// 14 ARPAbet monophthongs (2 slots each) and 8 diphthongs (4 slots each).
  /// The centring diphthongs IA/EA/UA follow British ARPAbet extensions.
  static const VowelInventory& default_inventory() {
    static const VowelInventory inv = [] {
      const char* monos[] = {"IY", "IH", "EH", "AE", "AA", "AO", "UH",
                             "UW", "AH", "ER", "AX", "IX", "UX", "AXR"};
      const char* diphs[] = {"EY", "AY", "OY", "AW", "OW", "IA", "EA", "UA"};
      std::vector<VowelEntry> entries;
      int slot = 0;
      for (const char* p : monos) {
        entries.push_back({p, VowelClass::Monophthong, {slot, slot + 1}});
        slot += 2;
      }
      for (const char* p : diphs) {
        entries.push_back({p, VowelClass::Diphthong, {slot, slot + 1, slot + 2, slot + 3}});
        slot += 4;
      }
      return VowelInventory(std::move(entries));
    }();
    return inv;
  }

 private:
  std::vector<VowelEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace accent
