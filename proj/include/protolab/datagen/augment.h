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

#ifndef PROTOLAB_DATAGEN_AUGMENT_H_
#define PROTOLAB_DATAGEN_AUGMENT_H_

#include <cstdint>
#include <string>
#include <vector>

namespace protolab {

struct AugmentConfig {
  double char_mod_probability = 0.3;
  int min_augs = 1;
  int max_augs = 5;
  int max_repetition = 3;
  std::string keyboard_layout = "pc";
  std::uint64_t seed = 0;
  int count = 6;  // variants per original

  void validate() const;
};

enum class AugmentEventType {
  kCaseFlip,
  kOrthographic,
  kKeyboardSubstitution,
  kDeletion,
  kInsertion,
  kRepetition,
  kSwap,
};

std::string to_string(AugmentEventType type);

struct AugmentEvent {
  AugmentEventType type;
  int position = 0;       // index into the original text
  std::string original;   // characters consumed
  std::string replacement;
  int factor = 1;         // copies after a repetition event
};

struct AugmentedText {
  std::string text;
  std::vector<AugmentEvent> events;
  int examined = 0;  // eligible characters passed through the probability gate
};

// Letters adjacent to `c` on the layout, lower case. Empty for non-letters.
const std::string& keyboard_neighbors(char c, const std::string& layout = "pc");

// Common misspelling substitutions for a lower-case letter, e.g. f -> ph.
const std::vector<std::string>& orthographic_alternatives(char c);

// Character-level typo variants. Eligible characters are ASCII letters. A scan
// starting at a random letter visits the letters cyclically and selects each
// with char_mod_probability until max_augs are selected; if a full pass yields
// fewer than min_augs, unselected letters are forced until it does. Each
// selected letter receives one event. Variants equal to the input or with a
// character run longer than max(max_repetition, longest input run) are
// redrawn.
std::vector<AugmentedText> typo_augment(const std::string& text,
                                        const AugmentConfig& config, int count);

// Single variant for an explicit seed.
AugmentedText typo_augment_once(const std::string& text,
                                const AugmentConfig& config, std::uint64_t seed);

// Length of the longest run of one repeated character.
int longest_run(const std::string& text);

}  // namespace protolab

#endif  // PROTOLAB_DATAGEN_AUGMENT_H_
