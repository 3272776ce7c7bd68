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

#ifndef PROTOLAB_DATAGEN_GRAMMAR_H_
#define PROTOLAB_DATAGEN_GRAMMAR_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace protolab {

enum class Pos {
  kNoun,
  kVerb,
  kAdjective,
  kAdverb,
  kDeterminer,
  kPreposition,
  kPronoun,
  kConjunction,
};

inline constexpr int kNumPos = 8;

std::string to_string(Pos pos);
// Throws ValidationError on an unknown tag.
Pos parse_pos(const std::string& tag);

struct LexiconEntry {
  std::string word;
  Pos pos;
  int rank = 0;  // frequency rank, 1 = most frequent
};

// POS-tagged word list. TSV format, one entry per line:
//   word <TAB> pos <TAB> rank
// Blank lines and lines starting with '#' are skipped.
class Lexicon {
 public:
  Lexicon() = default;
  // Throws ValidationError on duplicate words, empty words or ranks < 1.
  explicit Lexicon(std::vector<LexiconEntry> entries);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  // Words of one POS in rank order.
  const std::vector<std::string>& bucket(Pos pos) const;
  bool contains(const std::string& word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<LexiconEntry> entries_;
  std::array<std::vector<std::string>, kNumPos> buckets_;
};

Lexicon read_lexicon(std::istream& in);
Lexicon load_lexicon(const std::string& path);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);
void save_lexicon(const std::string& path, const Lexicon& lexicon);

enum class SentenceClass {
  kSimple,
  kComplex,
  kSimpleInterrogative,
  kComplexInterrogative,
  kSimpleImperative,
  kComplexImperative,
  kOneClause,
};

inline constexpr int kNumSentenceClasses = 7;

std::string to_string(SentenceClass cls);
SentenceClass parse_sentence_class(const std::string& name);
const std::array<SentenceClass, kNumSentenceClasses>& all_sentence_classes();

// One right-hand-side element: a nonterminal (capitalised name), a POS slot
// ($noun) or a literal terminal word / punctuation mark.
struct Symbol {
  enum Kind { kNonterminal, kSlot, kTerminal };
  Kind kind;
  std::string name;  // nonterminal name, literal text or POS tag
  Pos pos = Pos::kNoun;

  bool operator==(const Symbol& other) const {
    return kind == other.kind && name == other.name;
  }
};

using Alternative = std::vector<Symbol>;

// Grammar file format:
//   # comment
//   %class simple
//   %start S
//   S -> NP VP .
//   NP -> $determiner $noun | $pronoun
// Names starting with an upper-case letter are nonterminals, '$tag' is a
// lexicon slot, anything else is a literal token. A rule may be split over
// several lines with the same left-hand side; alternatives accumulate.
class Grammar {
 public:
  Grammar() = default;
  Grammar(SentenceClass cls, std::string start,
          std::map<std::string, std::vector<Alternative>> rules);

  SentenceClass sentence_class() const { return class_; }
  const std::string& start() const { return start_; }
  const std::map<std::string, std::vector<Alternative>>& rules() const {
    return rules_;
  }
  const std::vector<Alternative>& alternatives(const std::string& lhs) const;

  // Shortest derivation height from each nonterminal; used by the depth guard.
  const std::map<std::string, int>& min_height() const { return min_height_; }

  // Checks the start symbol and every referenced nonterminal are defined,
  // every nonterminal is reachable from start and productive. Throws
  // ValidationError.
  void validate() const;
  // validate() plus non-empty lexicon buckets for every slot used.
  void validate(const Lexicon& lexicon) const;

 private:
  void compute_heights();

  SentenceClass class_ = SentenceClass::kSimple;
  std::string start_;
  std::map<std::string, std::vector<Alternative>> rules_;
  std::map<std::string, int> min_height_;
};

Grammar parse_grammar(std::istream& in);
Grammar load_grammar(const std::string& path);
void write_grammar(std::ostream& out, const Grammar& grammar);

// Loads <dir>/<class>.cfg for each of the seven classes.
std::map<SentenceClass, Grammar> load_grammars(const std::string& dir);

struct DerivationNode {
  std::string label;  // nonterminal, "$tag" for slots, or the emitted token
  std::vector<DerivationNode> children;
  bool is_leaf() const { return children.empty(); }
};

struct Sentence {
  SentenceClass sentence_class;
  std::vector<std::string> tokens;  // leaves of the derivation, in order
  std::string text;                 // capitalised, punctuation attached
  DerivationNode derivation;
};

struct GenerateOptions {
  // Below this depth alternatives are chosen uniformly; at and beyond it the
  // generator only takes alternatives of minimal height, which terminates.
  int max_depth = 10;
};

// Leftmost random derivation from the start symbol with uniform choices at
// each nonterminal and slot. Throws ValidationError for an invalid grammar.
Sentence generate_sentence(const Grammar& grammar, const Lexicon& lexicon,
                           std::uint64_t seed, const GenerateOptions& options = {});

// Tokens joined with single spaces, except that punctuation attaches to the
// preceding word, and with the first letter upper-cased.
std::string render_sentence(const std::vector<std::string>& tokens);

}  // namespace protolab

#endif  // PROTOLAB_DATAGEN_GRAMMAR_H_
