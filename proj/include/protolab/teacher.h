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

#ifndef PROTOLAB_TEACHER_H_
#define PROTOLAB_TEACHER_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "protolab/common.h"
#include "protolab/regularizers.h"

namespace protolab {

enum class TeacherMode { kFile, kSynthetic };

std::string to_string(TeacherMode mode);
TeacherMode parse_teacher_mode(const std::string& name);

struct TeacherSource {
  TeacherMode mode = TeacherMode::kSynthetic;
  std::string path;             // file mode
  std::uint64_t seed = 0;       // synthetic feature map
  int dimension = 64;           // model hidden size d
  std::uint64_t projection_seed = 0;

  void validate() const;
};

// One line of a teacher file.
struct TeacherRecord {
  std::string text_id;
  std::string text;
  Vector vector;
};

// JSON lines {"text_id": ..., "text": ..., "vector": [...]}. All vectors must
// share one dimension.
std::vector<TeacherRecord> read_teacher_jsonl(std::istream& in);
void write_teacher_jsonl(std::ostream& out, const std::vector<TeacherRecord>& records);

// Fixed d x D Gaussian map with N(0, 1/d) entries, determined by the seed and
// both dimensions.
Matrix projection_matrix(int from_dim, int to_dim, std::uint64_t seed);

// Synthetic kernel: every lower-cased word token gets a Gaussian feature
// vector seeded by (seed, FNV-1a of the token); the text vector is the
// count-weighted sum, scaled to unit norm. Shared words give positive cosine.
// Throws ValidationError when the text has no tokens.
Vector synthetic_embedding(const std::string& text, int dimension,
                           std::uint64_t seed);

// Embedding lookup. File mode indexes the file once at construction; keys are
// matched against text_id first, then against the exact text. Stored vectors
// of another dimension are projected to d and rescaled to their stored norm.
// Read-only after construction, so concurrent lookups are safe.
class TeacherProvider {
 public:
  explicit TeacherProvider(TeacherSource source);

  const TeacherSource& source() const { return source_; }
  int dimension() const { return source_.dimension; }

  // LookupError for a key missing from the file, ValidationError for a zero
  // stored vector.
  TeacherEmbedding embed(const std::string& key) const;
  std::vector<TeacherEmbedding> embed_all(const std::vector<std::string>& keys) const;

 private:
  TeacherSource source_;
  std::vector<TeacherRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_text_;
  Matrix projection_;  // empty when stored dimension == d
};

TeacherEmbedding teacher_embedding(const TeacherSource& source,
                                   const std::string& text);

// Cosine similarity matrix of the teacher embeddings. Requires >= 2 texts.
SimilarityMatrix teacher_matrix(const TeacherProvider& provider,
                                const std::vector<std::string>& texts);

}  // namespace protolab

#endif  // PROTOLAB_TEACHER_H_
