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

#ifndef PROTOLAB_DATAGEN_CORPUS_H_
#define PROTOLAB_DATAGEN_CORPUS_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "protolab/datagen/augment.h"
#include "protolab/datagen/grammar.h"
#include "protolab/prototoken.h"

namespace protolab {

enum class Variant { kOriginal, kLexical, kSemantic };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& name);

// Record labels are the seven sentence-class names or "none" for text that
// carries no class (e.g. paraphrase sources loaded without originals).
bool is_valid_label(const std::string& label);

struct CorpusRecord {
  std::string id;
  std::string text;
  std::string label;
  Variant variant = Variant::kOriginal;
  std::string source_id;

  // Throws ValidationError on empty id/text or an undeclared label.
  void validate() const;
};

void write_corpus_jsonl(std::ostream& out, const std::vector<CorpusRecord>& records);
std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in);
std::vector<CorpusRecord> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records);

// `per_class` sentences for every grammar, ids "<class>-<k>". Sentence k of a
// class uses derive_seed(seed, {class index, k}).
std::vector<CorpusRecord> generate_corpus(
    const std::map<SentenceClass, Grammar>& grammars, const Lexicon& lexicon,
    int per_class, std::uint64_t seed, const GenerateOptions& options = {});

// config.count typo variants per record, ids "<source>/lex#<k>". Variants of
// record r use a seed derived from (config.seed, r).
std::vector<CorpusRecord> lexical_augmentations(
    const std::vector<CorpusRecord>& originals, const AugmentConfig& config);

// Paraphrase JSON: {"<source id>": ["paraphrase", ...], ...}. Records get ids
// "<source>/sem#<k>", variant semantic. When `originals` is given every source
// id must name one of them and the label is inherited; otherwise the label is
// "none". Empty ids or strings are validation errors.
std::vector<CorpusRecord> read_paraphrases(
    std::istream& in, const std::vector<CorpusRecord>* originals = nullptr);
std::vector<CorpusRecord> load_paraphrases(
    const std::string& path, const std::vector<CorpusRecord>* originals = nullptr);

// Word-level tokenizer. Words are maximal runs of letters, digits and
// apostrophes; every other non-space character is a token of its own. The
// vocabulary is closed: id 0 is <unk>, then corpus tokens by descending
// frequency, ties in byte order.
class Tokenizer {
 public:
  static constexpr int kUnk = 0;
  static inline const std::string kUnkToken = "<unk>";

  Tokenizer();  // only <unk>
  // max_size 0 keeps every token; otherwise the vocabulary (including <unk>)
  // is truncated to the most frequent entries.
  static Tokenizer build(const std::vector<std::string>& texts, int max_size = 0);
  // Vocabulary listed in id order; entry 0 must be <unk>.
  static Tokenizer from_vocabulary(std::vector<std::string> vocab);

  int size() const { return static_cast<int>(vocab_.size()); }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;   // IndexError when out of range

  std::vector<int> encode(const std::string& text) const;
  // Tokens joined by single spaces. Throws IndexError for ids >= size().
  std::string decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, int> index_;
};

// Split rule shared by the tokenizer and the corpus statistics.
std::vector<std::string> split_tokens(const std::string& text);

TargetSequence tokenize(const Tokenizer& tokenizer, const std::string& text);
std::string detokenize(const Tokenizer& tokenizer, const TargetSequence& tokens);

void write_vocabulary(std::ostream& out, const Tokenizer& tokenizer);
Tokenizer read_vocabulary(std::istream& in);

}  // namespace protolab

#endif  // PROTOLAB_DATAGEN_CORPUS_H_
