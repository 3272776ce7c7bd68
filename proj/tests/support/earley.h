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

#ifndef PROTOLAB_TESTS_SUPPORT_EARLEY_H_
#define PROTOLAB_TESTS_SUPPORT_EARLEY_H_

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "protolab/datagen/grammar.h"

namespace protolab::testing {

// Plain Earley recogniser over the grammar's rule table (no empty rules).
// Slots accept any word of the matching lexicon bucket. Written independently
// of the generator; used as the re-parse oracle.
inline bool earley_recognizes(const Grammar& g, const Lexicon& lex,
                              const std::vector<std::string>& tokens) {
  struct Item {
    std::string lhs;
    int alt;
    int dot;
    int origin;
    bool operator<(const Item& o) const {
      return std::tie(lhs, alt, dot, origin) < std::tie(o.lhs, o.alt, o.dot, o.origin);
    }
  };
  auto matches = [&](const Symbol& s, const std::string& tok) {
    if (s.kind == Symbol::kTerminal) return s.name == tok;
    if (s.kind != Symbol::kSlot) return false;
    for (const auto& w : lex.bucket(s.pos))
      if (w == tok) return true;
    return false;
  };

  const int n = static_cast<int>(tokens.size());
  std::vector<std::set<Item>> chart(n + 1);
  std::vector<std::vector<Item>> agenda(n + 1);
  auto add = [&](int k, const Item& it) {
    if (chart[k].insert(it).second) agenda[k].push_back(it);
  };
  for (int a = 0; a < static_cast<int>(g.alternatives(g.start()).size()); ++a)
    add(0, {g.start(), a, 0, 0});

  for (int k = 0; k <= n; ++k) {
    for (std::size_t q = 0; q < agenda[k].size(); ++q) {
      const Item it = agenda[k][q];
      const Alternative& rhs = g.alternatives(it.lhs)[it.alt];
      if (it.dot == static_cast<int>(rhs.size())) {
        // Complete: advance every item in the origin set waiting on lhs.
        const std::vector<Item> waiting(agenda[it.origin].begin(),
                                        agenda[it.origin].end());
        for (const auto& w : waiting) {
          const Alternative& wr = g.alternatives(w.lhs)[w.alt];
          if (w.dot < static_cast<int>(wr.size()) &&
              wr[w.dot].kind == Symbol::kNonterminal && wr[w.dot].name == it.lhs)
            add(k, {w.lhs, w.alt, w.dot + 1, w.origin});
        }
        continue;
      }
      const Symbol& next = rhs[it.dot];
      if (next.kind == Symbol::kNonterminal) {
        const auto& alts = g.alternatives(next.name);
        for (int a = 0; a < static_cast<int>(alts.size()); ++a)
          add(k, {next.name, a, 0, k});
      } else if (k < n && matches(next, tokens[k])) {
        add(k + 1, {it.lhs, it.alt, it.dot + 1, it.origin});
      }
    }
  }
  for (const auto& it : chart[n])
    if (it.lhs == g.start() && it.origin == 0 &&
        it.dot == static_cast<int>(g.alternatives(it.lhs)[it.alt].size()))
      return true;
  return false;
}

}  // namespace protolab::testing

#endif  // PROTOLAB_TESTS_SUPPORT_EARLEY_H_
