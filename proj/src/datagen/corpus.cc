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

#include "protolab/datagen/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "protolab/common.h"
#include "protolab/random.h"

namespace protolab {

using nlohmann::json;

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kOriginal:
      return "original";
    case Variant::kLexical:
      return "lexical";
    case Variant::kSemantic:
      return "semantic";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "original") return Variant::kOriginal;
  if (name == "lexical") return Variant::kLexical;
  if (name == "semantic") return Variant::kSemantic;
  throw ValidationError("unknown variant '" + name + "'");
}

bool is_valid_label(const std::string& label) {
  if (label == "none") return true;
  for (SentenceClass c : all_sentence_classes())
    if (to_string(c) == label) return true;
  return false;
}

void CorpusRecord::validate() const {
  if (id.empty()) throw ValidationError("corpus record with empty id");
  if (text.empty()) throw ValidationError("corpus record '" + id + "' has empty text");
  if (!is_valid_label(label))
    throw ValidationError("corpus record '" + id + "' has undeclared label '" +
                          label + "'");
  if (source_id.empty())
    throw ValidationError("corpus record '" + id + "' has empty source_id");
}

void write_corpus_jsonl(std::ostream& out, const std::vector<CorpusRecord>& records) {
  for (const auto& r : records) {
    r.validate();
    out << json{{"id", r.id},
                {"text", r.text},
                {"label", r.label},
                {"variant", to_string(r.variant)},
                {"source_id", r.source_id}}
               .dump()
        << '\n';
  }
}

std::vector<CorpusRecord> read_corpus_jsonl(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      CorpusRecord r;
      r.id = j.at("id").get<std::string>();
      r.text = j.at("text").get<std::string>();
      r.label = j.at("label").get<std::string>();
      r.variant = parse_variant(j.at("variant").get<std::string>());
      r.source_id = j.at("source_id").get<std::string>();
      r.validate();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError("corpus line " + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
  return out;
}

std::vector<CorpusRecord> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open corpus '" + path + "'");
  return read_corpus_jsonl(in);
}

void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write corpus '" + path + "'");
  write_corpus_jsonl(out, records);
}

std::vector<CorpusRecord> generate_corpus(
    const std::map<SentenceClass, Grammar>& grammars, const Lexicon& lexicon,
    int per_class, std::uint64_t seed, const GenerateOptions& options) {
  if (per_class < 1) throw ArgumentError("per_class must be >= 1");
  std::vector<CorpusRecord> out;
  for (const auto& [cls, grammar] : grammars) {
    for (int k = 0; k < per_class; ++k) {
      const Sentence s = generate_sentence(
          grammar, lexicon,
          derive_seed(seed, {static_cast<std::uint64_t>(cls),
                             static_cast<std::uint64_t>(k)}),
          options);
      CorpusRecord r;
      r.id = to_string(cls) + "-" + std::to_string(k);
      r.text = s.text;
      r.label = to_string(cls);
      r.variant = Variant::kOriginal;
      r.source_id = r.id;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<CorpusRecord> lexical_augmentations(
    const std::vector<CorpusRecord>& originals, const AugmentConfig& config) {
  config.validate();
  std::vector<CorpusRecord> out;
  for (std::size_t r = 0; r < originals.size(); ++r) {
    const auto& src = originals[r];
    AugmentConfig per = config;
    per.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(r)});
    const auto variants = typo_augment(src.text, per, config.count);
    for (int k = 0; k < config.count; ++k) {
      CorpusRecord rec;
      rec.id = src.id + "/lex#" + std::to_string(k);
      rec.text = variants[k].text;
      rec.label = src.label;
      rec.variant = Variant::kLexical;
      rec.source_id = src.id;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<CorpusRecord> read_paraphrases(std::istream& in,
                                           const std::vector<CorpusRecord>* originals) {
  // Keys keep file order so record order follows the file.
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("paraphrase file: ") + e.what());
  }
  if (!j.is_object())
    throw ValidationError("paraphrase file must map source ids to arrays");
  std::unordered_map<std::string, const CorpusRecord*> by_id;
  if (originals)
    for (const auto& r : *originals) by_id[r.id] = &r;

  std::vector<CorpusRecord> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& source = it.key();
    if (source.empty()) throw ValidationError("paraphrase entry with empty source id");
    std::string label = "none";
    if (originals) {
      const auto found = by_id.find(source);
      if (found == by_id.end())
        throw ValidationError("paraphrase source id '" + source +
                              "' matches no original record");
      label = found->second->label;
    }
    if (!it.value().is_array())
      throw ValidationError("paraphrases of '" + source + "' must be an array");
    int k = 0;
    for (const auto& p : it.value()) {
      if (!p.is_string())
        throw ValidationError("paraphrase of '" + source + "' is not a string");
      CorpusRecord r;
      r.text = p.get<std::string>();
      if (r.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ValidationError("empty paraphrase for '" + source + "'");
      r.id = source + "/sem#" + std::to_string(k++);
      r.label = label;
      r.variant = Variant::kSemantic;
      r.source_id = source;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<CorpusRecord> load_paraphrases(const std::string& path,
                                           const std::vector<CorpusRecord>* originals) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open paraphrases '" + path + "'");
  return read_paraphrases(in, originals);
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'' || u >= 0x80) {
      word += c;
    } else if (std::isspace(u)) {
      flush();
    } else {
      flush();
      out.emplace_back(1, c);
    }
  }
  flush();
  return out;
}

Tokenizer::Tokenizer() : vocab_{kUnkToken}, index_{{kUnkToken, kUnk}} {}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts, int max_size) {
  if (max_size < 0 || max_size == 1)
    throw ArgumentError("tokenizer max_size must be 0 or >= 2");
  std::unordered_map<std::string, long> counts;
  for (const auto& t : texts)
    for (auto& tok : split_tokens(t)) ++counts[tok];
  counts.erase(kUnkToken);
  std::vector<std::pair<std::string, long>> order(counts.begin(), counts.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> vocab = {kUnkToken};
  for (const auto& [tok, n] : order) {
    if (max_size > 0 && static_cast<int>(vocab.size()) >= max_size) break;
    vocab.push_back(tok);
  }
  return from_vocabulary(std::move(vocab));
}

Tokenizer Tokenizer::from_vocabulary(std::vector<std::string> vocab) {
  if (vocab.empty() || vocab[0] != kUnkToken)
    throw ValidationError("vocabulary must start with " + kUnkToken);
  Tokenizer t;
  t.vocab_ = std::move(vocab);
  t.index_.clear();
  for (int i = 0; i < t.size(); ++i)
    if (!t.index_.emplace(t.vocab_[i], i).second)
      throw ValidationError("duplicate vocabulary entry '" + t.vocab_[i] + "'");
  return t;
}

int Tokenizer::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || id >= size())
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(size()));
  return vocab_[id];
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& tok : split_tokens(text)) ids.push_back(id(tok));
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

TargetSequence tokenize(const Tokenizer& tokenizer, const std::string& text) {
  return TargetSequence{tokenizer.encode(text)};
}

std::string detokenize(const Tokenizer& tokenizer, const TargetSequence& tokens) {
  return tokenizer.decode(tokens.tokens);
}

void write_vocabulary(std::ostream& out, const Tokenizer& tokenizer) {
  out << json(tokenizer.vocabulary()).dump(1) << '\n';
}

Tokenizer read_vocabulary(std::istream& in) {
  try {
    return Tokenizer::from_vocabulary(json::parse(in).get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("vocabulary file: ") + e.what());
  }
}

}  // namespace protolab
