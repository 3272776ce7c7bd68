// Copyright 2026 The Protolab Authors
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

#include "protolab/datagen/augment.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "protolab/common.h"
#include "protolab/random.h"

namespace protolab {
namespace {

bool is_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

// Apply the case of `like` to the first character of s.
std::string match_case(std::string s, char like) {
  if (!s.empty() && std::isupper(static_cast<unsigned char>(like))) s[0] = upper(s[0]);
  return s;
}

// Physical neighbours on a PC QWERTY board, letters only.
const std::array<std::string, 26>& qwerty_table() {
  static const std::array<std::string, 26> table = {
      "qwsz",    // a
      "vghn",    // b
      "xdfv",    // c
      "serfcx",  // d
      "wsdr",    // e
      "drtgvc",  // f
      "ftyhbv",  // g
      "gyujnb",  // h
      "ujko",    // i
      "huikmn",  // j
      "jiolm",   // k
      "kop",     // l
      "njk",     // m
      "bhjm",    // n
      "iklp",    // o
      "ol",      // p
      "wa",      // q
      "edft",    // r
      "awedxz",  // s
      "rfgy",    // t
      "yhji",    // u
      "cfgb",    // v
      "qase",    // w
      "zsdc",    // x
      "tghu",    // y
      "asx",     // z
  };
  return table;
}

int run_length_at(const std::string& s, int i) {
  int left = i, right = i;
  while (left > 0 && s[left - 1] == s[i]) --left;
  while (right + 1 < static_cast<int>(s.size()) && s[right + 1] == s[i]) ++right;
  return right - left + 1;
}

}  // namespace

std::string to_string(AugmentEventType type) {
  switch (type) {
    case AugmentEventType::kCaseFlip:
      return "case_flip";
    case AugmentEventType::kOrthographic:
      return "orthographic";
    case AugmentEventType::kKeyboardSubstitution:
      return "keyboard";
    case AugmentEventType::kDeletion:
      return "deletion";
    case AugmentEventType::kInsertion:
      return "insertion";
    case AugmentEventType::kRepetition:
      return "repetition";
    case AugmentEventType::kSwap:
      return "swap";
  }
  return "unknown";
}

void AugmentConfig::validate() const {
  if (!(char_mod_probability >= 0.0 && char_mod_probability <= 1.0))
    throw ConfigError("char_mod_probability must be in [0, 1]");
  if (min_augs < 1)
    throw ConfigError("min_augs must be at least 1");
  if (max_augs < min_augs) throw ConfigError("max_augs must be >= min_augs");
  if (max_repetition < 1) throw ConfigError("max_repetition must be >= 1");
  if (keyboard_layout != "pc")
    throw ConfigError("unsupported keyboard layout '" + keyboard_layout + "'");
  if (count < 1) throw ConfigError("augmentation count must be >= 1");
}

const std::string& keyboard_neighbors(char c, const std::string& layout) {
  static const std::string none;
  if (layout != "pc")
    throw ConfigError("unsupported keyboard layout '" + layout + "'");
  if (!is_letter(c)) return none;
  return qwerty_table()[lower(c) - 'a'];
}

const std::vector<std::string>& orthographic_alternatives(char c) {
  // Vowel confusions, soft/hard consonant swaps, and doubled or undoubled
  // consonants.
  static const std::map<char, std::vector<std::string>> table = {
      {'a', {"e"}},        {'e', {"a", "i"}},  {'i', {"e", "y"}},
      {'o', {"u"}},        {'u', {"o"}},       {'y', {"i"}},
      {'c', {"k", "s"}},   {'k', {"c"}},       {'s', {"c", "z"}},
      {'z', {"s"}},        {'f', {"ph"}},      {'g', {"j"}},
      {'j', {"g"}},        {'q', {"k"}},       {'x', {"ks"}},
      {'l', {"ll"}},       {'t', {"tt"}},      {'r', {"rr"}},
      {'n', {"nn"}},       {'m', {"mm"}},      {'p', {"pp"}},
  };
  static const std::vector<std::string> none;
  const auto it = table.find(lower(c));
  return it == table.end() ? none : it->second;
}

int longest_run(const std::string& text) {
  int best = 0, run = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    run = (i > 0 && text[i] == text[i - 1]) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

namespace {

AugmentedText draw_variant(const std::string& text, const AugmentConfig& config,
                           Rng& rng) {
  std::vector<int> eligible;
  for (int i = 0; i < static_cast<int>(text.size()); ++i)
    if (is_letter(text[i])) eligible.push_back(i);
  const int n = static_cast<int>(eligible.size());

  AugmentedText out;
  std::vector<bool> selected(text.size(), false);
  int chosen = 0;
  const int start = static_cast<int>(rng.below(n));
  for (int k = 0; k < n && chosen < config.max_augs; ++k) {
    const int pos = eligible[(start + k) % n];
    ++out.examined;
    if (rng.bernoulli(config.char_mod_probability)) {
      selected[pos] = true;
      ++chosen;
    }
  }
  while (chosen < std::min(config.min_augs, n)) {
    const int pos = eligible[rng.below(n)];
    if (selected[pos]) continue;
    selected[pos] = true;
    ++chosen;
  }

  std::string result;
  result.reserve(text.size() + 8);
  for (int i = 0; i < static_cast<int>(text.size()); ++i) {
    const char c = text[i];
    if (!selected[i]) {
      result += c;
      continue;
    }
    std::vector<AugmentEventType> options = {
        AugmentEventType::kCaseFlip, AugmentEventType::kKeyboardSubstitution,
        AugmentEventType::kDeletion, AugmentEventType::kInsertion};
    if (!orthographic_alternatives(c).empty())
      options.push_back(AugmentEventType::kOrthographic);
    const int run = run_length_at(text, i);
    if (config.max_repetition - run + 1 >= 2)
      options.push_back(AugmentEventType::kRepetition);
    if (i + 1 < static_cast<int>(text.size()) && text[i + 1] != c &&
        !selected[i + 1])
      options.push_back(AugmentEventType::kSwap);

    AugmentEvent ev;
    ev.type = options[rng.below(options.size())];
    ev.position = i;
    ev.original = std::string(1, c);
    const std::string& near = keyboard_neighbors(c, config.keyboard_layout);
    switch (ev.type) {
      case AugmentEventType::kCaseFlip:
        ev.replacement = std::string(
            1, std::isupper(static_cast<unsigned char>(c)) ? lower(c) : upper(c));
        break;
      case AugmentEventType::kOrthographic: {
        const auto& alts = orthographic_alternatives(c);
        ev.replacement = match_case(alts[rng.below(alts.size())], c);
        break;
      }
      case AugmentEventType::kKeyboardSubstitution:
        ev.replacement = match_case(std::string(1, near[rng.below(near.size())]), c);
        break;
      case AugmentEventType::kDeletion:
        break;
      case AugmentEventType::kInsertion:
        ev.replacement = std::string(1, c) +
                         match_case(std::string(1, near[rng.below(near.size())]), c);
        break;
      case AugmentEventType::kRepetition: {
        const int max_factor = config.max_repetition - run + 1;
        ev.factor = 2 + static_cast<int>(rng.below(max_factor - 1));
        ev.replacement = std::string(ev.factor, c);
        break;
      }
      case AugmentEventType::kSwap:
        ev.original = text.substr(i, 2);
        ev.replacement = {text[i + 1], c};
        ++i;  // the partner character is consumed
        break;
    }
    result += ev.replacement;
    out.events.push_back(std::move(ev));
  }
  out.text = std::move(result);
  return out;
}

}  // namespace

AugmentedText typo_augment_once(const std::string& text,
                                const AugmentConfig& config, std::uint64_t seed) {
  config.validate();
  if (text.empty()) throw ArgumentError("cannot augment empty text");
  const bool has_letter = std::any_of(text.begin(), text.end(), is_letter);
  if (!has_letter)
    throw ArgumentError("text has no letters to augment: '" + text + "'");
  const int run_cap = std::max(config.max_repetition, longest_run(text));
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(derive_seed(seed, {attempt}));
    AugmentedText v = draw_variant(text, config, rng);
    if (v.text != text && longest_run(v.text) <= run_cap) return v;
  }
  throw ValidationError("no valid typo variant found for '" + text + "'");
}

std::vector<AugmentedText> typo_augment(const std::string& text,
                                        const AugmentConfig& config, int count) {
  if (count < 1) throw ArgumentError("augmentation count must be >= 1");
  std::vector<AugmentedText> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k)
    out.push_back(typo_augment_once(
        text, config, derive_seed(config.seed, {static_cast<std::uint64_t>(k)})));
  return out;
}

}  // namespace protolab
