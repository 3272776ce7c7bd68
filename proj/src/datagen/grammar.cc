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

#include "protolab/datagen/grammar.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "protolab/common.h"
#include "protolab/random.h"

namespace protolab {
namespace {

constexpr std::array<const char*, kNumPos> kPosNames = {
    "noun",       "verb",        "adjective", "adverb",
    "determiner", "preposition", "pronoun",   "conjunction"};

constexpr std::array<const char*, kNumSentenceClasses> kClassNames = {
    "simple",           "complex",           "simple_interrogative",
    "complex_interrogative", "simple_imperative", "complex_imperative",
    "one_clause"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

bool is_punctuation(const std::string& tok) {
  return tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0])) &&
         tok[0] != '$';
}

Symbol make_symbol(const std::string& tok, int line) {
  Symbol s;
  if (tok[0] == '$') {
    s.kind = Symbol::kSlot;
    s.name = tok.substr(1);
    try {
      s.pos = parse_pos(s.name);
    } catch (const ValidationError& e) {
      throw ValidationError("grammar line " + std::to_string(line) + ": " +
                            e.what());
    }
  } else if (std::isupper(static_cast<unsigned char>(tok[0]))) {
    s.kind = Symbol::kNonterminal;
    s.name = tok;
  } else {
    s.kind = Symbol::kTerminal;
    s.name = tok;
  }
  return s;
}

std::string symbol_text(const Symbol& s) {
  return s.kind == Symbol::kSlot ? "$" + s.name : s.name;
}

}  // namespace

std::string to_string(Pos pos) { return kPosNames[static_cast<int>(pos)]; }

Pos parse_pos(const std::string& tag) {
  for (int i = 0; i < kNumPos; ++i)
    if (tag == kPosNames[i]) return static_cast<Pos>(i);
  throw ValidationError("unknown part-of-speech tag '" + tag + "'");
}

Lexicon::Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.word.empty()) throw ValidationError("lexicon entry with empty word");
    if (e.word.find_first_of(" \t") != std::string::npos)
      throw ValidationError("lexicon word contains whitespace: '" + e.word + "'");
    if (e.rank < 1)
      throw ValidationError("lexicon rank must be >= 1 for '" + e.word + "'");
    if (!seen.insert(e.word).second)
      throw ValidationError("duplicate lexicon word '" + e.word + "'");
  }
  std::vector<const LexiconEntry*> order;
  for (const auto& e : entries_) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const LexiconEntry* a, const LexiconEntry* b) {
                     return a->rank < b->rank;
                   });
  for (const auto* e : order) buckets_[static_cast<int>(e->pos)].push_back(e->word);
}

const std::vector<std::string>& Lexicon::bucket(Pos pos) const {
  return buckets_[static_cast<int>(pos)];
}

bool Lexicon::contains(const std::string& word) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const LexiconEntry& e) { return e.word == word; });
}

Lexicon read_lexicon(std::istream& in) {
  std::vector<LexiconEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(trim(f));
    if (fields.size() != 3)
      throw ValidationError("lexicon line " + std::to_string(lineno) +
                            ": expected word<TAB>pos<TAB>rank");
    LexiconEntry e;
    e.word = fields[0];
    try {
      e.pos = parse_pos(fields[1]);
    } catch (const ValidationError& err) {
      throw ValidationError("lexicon line " + std::to_string(lineno) + ": " +
                            err.what());
    }
    try {
      std::size_t used = 0;
      e.rank = std::stoi(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ValidationError("lexicon line " + std::to_string(lineno) +
                            ": bad rank '" + fields[2] + "'");
    }
    entries.push_back(std::move(e));
  }
  return Lexicon(std::move(entries));
}

Lexicon load_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open lexicon '" + path + "'");
  return read_lexicon(in);
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  out << "# word\tpos\trank\n";
  for (const auto& e : lexicon.entries())
    out << e.word << '\t' << to_string(e.pos) << '\t' << e.rank << '\n';
}

void save_lexicon(const std::string& path, const Lexicon& lexicon) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write lexicon '" + path + "'");
  write_lexicon(out, lexicon);
}

std::string to_string(SentenceClass cls) {
  return kClassNames[static_cast<int>(cls)];
}

SentenceClass parse_sentence_class(const std::string& name) {
  for (int i = 0; i < kNumSentenceClasses; ++i)
    if (name == kClassNames[i]) return static_cast<SentenceClass>(i);
  throw ValidationError("unknown sentence class '" + name + "'");
}

const std::array<SentenceClass, kNumSentenceClasses>& all_sentence_classes() {
  static const std::array<SentenceClass, kNumSentenceClasses> all = {
      SentenceClass::kSimple,
      SentenceClass::kComplex,
      SentenceClass::kSimpleInterrogative,
      SentenceClass::kComplexInterrogative,
      SentenceClass::kSimpleImperative,
      SentenceClass::kComplexImperative,
      SentenceClass::kOneClause};
  return all;
}

Grammar::Grammar(SentenceClass cls, std::string start,
                 std::map<std::string, std::vector<Alternative>> rules)
    : class_(cls), start_(std::move(start)), rules_(std::move(rules)) {
  compute_heights();
}

const std::vector<Alternative>& Grammar::alternatives(const std::string& lhs) const {
  const auto it = rules_.find(lhs);
  if (it == rules_.end())
    throw LookupError("no rule for nonterminal '" + lhs + "'");
  return it->second;
}

void Grammar::compute_heights() {
  // Fixed point: a nonterminal gets a height once one of its alternatives
  // consists only of terminals, slots and nonterminals that already have one.
  min_height_.clear();
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [lhs, alts] : rules_) {
      int best = std::numeric_limits<int>::max();
      for (const auto& alt : alts) {
        int h = 0;
        bool ok = true;
        for (const auto& s : alt) {
          if (s.kind != Symbol::kNonterminal) continue;
          const auto it = min_height_.find(s.name);
          if (it == min_height_.end()) {
            ok = false;
            break;
          }
          h = std::max(h, it->second);
        }
        if (ok) best = std::min(best, h + 1);
      }
      if (best == std::numeric_limits<int>::max()) continue;
      const auto it = min_height_.find(lhs);
      if (it == min_height_.end() || it->second > best) {
        min_height_[lhs] = best;
        changed = true;
      }
    }
  }
}

void Grammar::validate() const {
  if (start_.empty()) throw ValidationError("grammar has no start symbol");
  if (!rules_.count(start_))
    throw ValidationError("start symbol '" + start_ + "' has no rule");
  for (const auto& [lhs, alts] : rules_) {
    if (alts.empty())
      throw ValidationError("nonterminal '" + lhs + "' has no alternatives");
    for (const auto& alt : alts) {
      if (alt.empty())
        throw ValidationError("empty alternative for '" + lhs + "'");
      for (const auto& s : alt)
        if (s.kind == Symbol::kNonterminal && !rules_.count(s.name))
          throw ValidationError("undefined nonterminal '" + s.name +
                                "' used by '" + lhs + "'");
    }
  }
  std::set<std::string> reached = {start_};
  std::vector<std::string> stack = {start_};
  while (!stack.empty()) {
    const std::string nt = stack.back();
    stack.pop_back();
    for (const auto& alt : rules_.at(nt))
      for (const auto& s : alt)
        if (s.kind == Symbol::kNonterminal && reached.insert(s.name).second)
          stack.push_back(s.name);
  }
  for (const auto& [lhs, alts] : rules_) {
    if (!reached.count(lhs))
      throw ValidationError("nonterminal '" + lhs + "' is unreachable from '" +
                            start_ + "'");
    if (!min_height_.count(lhs))
      throw ValidationError("nonterminal '" + lhs +
                            "' is unproductive (derives no finite string)");
  }
}

void Grammar::validate(const Lexicon& lexicon) const {
  validate();
  for (const auto& [lhs, alts] : rules_)
    for (const auto& alt : alts)
      for (const auto& s : alt)
        if (s.kind == Symbol::kSlot && lexicon.bucket(s.pos).empty())
          throw ValidationError("lexicon has no '" + s.name + "' words for " +
                                to_string(class_) + " grammar");
}

Grammar parse_grammar(std::istream& in) {
  std::string line, cls_name, start;
  std::map<std::string, std::vector<Alternative>> rules;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '%') {
      const auto words = split_ws(t);
      if (words.size() != 2)
        throw ValidationError("grammar line " + std::to_string(lineno) +
                              ": directive takes one argument");
      if (words[0] == "%class")
        cls_name = words[1];
      else if (words[0] == "%start")
        start = words[1];
      else
        throw ValidationError("grammar line " + std::to_string(lineno) +
                              ": unknown directive " + words[0]);
      continue;
    }
    const auto arrow = t.find("->");
    if (arrow == std::string::npos)
      throw ValidationError("grammar line " + std::to_string(lineno) +
                            ": expected 'LHS -> alternatives'");
    const std::string lhs = trim(t.substr(0, arrow));
    if (lhs.empty() || !std::isupper(static_cast<unsigned char>(lhs[0])) ||
        lhs.find_first_of(" \t") != std::string::npos)
      throw ValidationError("grammar line " + std::to_string(lineno) +
                            ": bad left-hand side '" + lhs + "'");
    std::string rest = t.substr(arrow + 2);
    auto& alts = rules[lhs];
    std::size_t begin = 0;
    while (true) {
      const auto bar = rest.find('|', begin);
      const std::string piece =
          rest.substr(begin, bar == std::string::npos ? std::string::npos
                                                      : bar - begin);
      const auto toks = split_ws(piece);
      if (toks.empty())
        throw ValidationError("grammar line " + std::to_string(lineno) +
                              ": empty alternative");
      Alternative alt;
      for (const auto& tok : toks) alt.push_back(make_symbol(tok, lineno));
      alts.push_back(std::move(alt));
      if (bar == std::string::npos) break;
      begin = bar + 1;
    }
  }
  if (cls_name.empty()) throw ValidationError("grammar has no %class directive");
  if (start.empty()) throw ValidationError("grammar has no %start directive");
  return Grammar(parse_sentence_class(cls_name), start, std::move(rules));
}

Grammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open grammar '" + path + "'");
  return parse_grammar(in);
}

void write_grammar(std::ostream& out, const Grammar& grammar) {
  out << "%class " << to_string(grammar.sentence_class()) << '\n';
  out << "%start " << grammar.start() << '\n';
  for (const auto& [lhs, alts] : grammar.rules()) {
    out << lhs << " ->";
    for (std::size_t a = 0; a < alts.size(); ++a) {
      if (a > 0) out << " |";
      for (const auto& s : alts[a]) out << ' ' << symbol_text(s);
    }
    out << '\n';
  }
}

std::map<SentenceClass, Grammar> load_grammars(const std::string& dir) {
  std::map<SentenceClass, Grammar> out;
  for (SentenceClass cls : all_sentence_classes()) {
    Grammar g = load_grammar(dir + "/" + to_string(cls) + ".cfg");
    if (g.sentence_class() != cls)
      throw ValidationError("grammar file " + to_string(cls) +
                            ".cfg declares class " + to_string(g.sentence_class()));
    out.emplace(cls, std::move(g));
  }
  return out;
}

namespace {

class Deriver {
 public:
  Deriver(const Grammar& g, const Lexicon& lex, std::uint64_t seed,
          const GenerateOptions& options)
      : g_(g), lex_(lex), rng_(seed), options_(options) {}

  DerivationNode expand(const std::string& nt, int depth,
                        std::vector<std::string>& tokens) {
    const auto& alts = g_.alternatives(nt);
    std::vector<int> candidates;
    if (depth < options_.max_depth) {
      for (int i = 0; i < static_cast<int>(alts.size()); ++i)
        candidates.push_back(i);
    } else {
      // Only alternatives realising the nonterminal's minimal height.
      const int target = g_.min_height().at(nt);
      for (int i = 0; i < static_cast<int>(alts.size()); ++i)
        if (height(alts[i]) + 1 == target) candidates.push_back(i);
    }
    const Alternative& alt = alts[candidates[rng_.below(candidates.size())]];

    DerivationNode node{nt, {}};
    for (const auto& s : alt) {
      switch (s.kind) {
        case Symbol::kNonterminal:
          node.children.push_back(expand(s.name, depth + 1, tokens));
          break;
        case Symbol::kSlot: {
          const auto& bucket = lex_.bucket(s.pos);
          const std::string& w = bucket[rng_.below(bucket.size())];
          tokens.push_back(w);
          node.children.push_back({"$" + s.name, {{w, {}}}});
          break;
        }
        case Symbol::kTerminal:
          tokens.push_back(s.name);
          node.children.push_back({s.name, {}});
          break;
      }
    }
    return node;
  }

 private:
  int height(const Alternative& alt) const {
    int h = 0;
    for (const auto& s : alt) {
      if (s.kind != Symbol::kNonterminal) continue;
      const auto it = g_.min_height().find(s.name);
      if (it == g_.min_height().end()) return std::numeric_limits<int>::max() - 1;
      h = std::max(h, it->second);
    }
    return h;
  }

  const Grammar& g_;
  const Lexicon& lex_;
  Rng rng_;
  GenerateOptions options_;
};

}  // namespace

Sentence generate_sentence(const Grammar& grammar, const Lexicon& lexicon,
                           std::uint64_t seed, const GenerateOptions& options) {
  if (options.max_depth < 1) throw ConfigError("max_depth must be >= 1");
  try {
    grammar.validate(lexicon);
  } catch (const ValidationError& e) {
    throw GenerationError(std::string("cannot generate: ") + e.what());
  }
  Deriver deriver(grammar, lexicon, seed, options);
  Sentence s;
  s.sentence_class = grammar.sentence_class();
  s.derivation = deriver.expand(grammar.start(), 0, s.tokens);
  s.text = render_sentence(s.tokens);
  return s;
}

std::string render_sentence(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty() && !is_punctuation(tok)) out += ' ';
    out += tok;
  }
  const auto first = std::find_if(out.begin(), out.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c));
  });
  if (first != out.end())
    *first = static_cast<char>(std::toupper(static_cast<unsigned char>(*first)));
  return out;
}

}  // namespace protolab
