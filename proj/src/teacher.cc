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

#include "protolab/teacher.h"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "protolab/datagen/corpus.h"
#include "protolab/json_util.h"
#include "protolab/random.h"

namespace protolab {

using nlohmann::json;

std::string to_string(TeacherMode mode) {
  return mode == TeacherMode::kFile ? "file" : "synthetic";
}

TeacherMode parse_teacher_mode(const std::string& name) {
  if (name == "file") return TeacherMode::kFile;
  if (name == "synthetic") return TeacherMode::kSynthetic;
  throw ConfigError("unknown teacher mode '" + name + "'");
}

void TeacherSource::validate() const {
  if (dimension < 1) throw ConfigError("teacher dimension must be >= 1");
  if (mode == TeacherMode::kFile) {
    if (path.empty()) throw ConfigError("file teacher needs a path");
    if (!std::ifstream(path))
      throw ConfigError("teacher file '" + path + "' does not exist");
  }
}

std::vector<TeacherRecord> read_teacher_jsonl(std::istream& in) {
  std::vector<TeacherRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "teacher line " + std::to_string(lineno);
    TeacherRecord r;
    try {
      const json j = json::parse(line);
      r.text_id = j.value("text_id", std::string());
      r.text = j.value("text", std::string());
      r.vector = vector_from_json(j.at("vector"));
    } catch (const json::exception& e) {
      throw LoadError(where + ": " + e.what());
    }
    if (r.text_id.empty() && r.text.empty())
      throw ValidationError(where + ": needs text_id or text");
    if (r.vector.size() == 0) throw ValidationError(where + ": empty vector");
    if (!r.vector.allFinite()) throw ValidationError(where + ": non-finite vector");
    if (!out.empty() && r.vector.size() != out.front().vector.size())
      throw ValidationError(where + ": dimension " +
                            std::to_string(r.vector.size()) + " differs from " +
                            std::to_string(out.front().vector.size()));
    out.push_back(std::move(r));
  }
  return out;
}

void write_teacher_jsonl(std::ostream& out, const std::vector<TeacherRecord>& records) {
  for (const auto& r : records)
    out << json{{"text_id", r.text_id}, {"text", r.text},
                {"vector", to_json_array(r.vector)}}
               .dump(-1, ' ', false, json::error_handler_t::strict)
        << '\n';
}

Matrix projection_matrix(int from_dim, int to_dim, std::uint64_t seed) {
  if (from_dim < 1 || to_dim < 1) throw ArgumentError("projection dimensions must be >= 1");
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(from_dim),
                             static_cast<std::uint64_t>(to_dim)}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(to_dim));
  Matrix p(to_dim, from_dim);
  for (int i = 0; i < to_dim; ++i)
    for (int j = 0; j < from_dim; ++j) p(i, j) = scale * rng.normal();
  return p;
}

Vector synthetic_embedding(const std::string& text, int dimension,
                           std::uint64_t seed) {
  if (dimension < 1) throw ArgumentError("dimension must be >= 1");
  std::map<std::string, int> counts;
  for (auto tok : split_tokens(text)) {
    for (auto& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    ++counts[tok];
  }
  if (counts.empty())
    throw ValidationError("synthetic teacher: text has no tokens: '" + text + "'");
  Vector v = Vector::Zero(dimension);
  for (const auto& [tok, n] : counts) {
    Rng rng(derive_seed(seed, {fnv1a64(tok)}));
    for (int j = 0; j < dimension; ++j) v[j] += n * rng.normal();
  }
  return v / v.norm();
}

TeacherProvider::TeacherProvider(TeacherSource source) : source_(std::move(source)) {
  source_.validate();
  if (source_.mode != TeacherMode::kFile) return;
  std::ifstream in(source_.path);
  if (!in) throw LoadError("cannot open teacher file '" + source_.path + "'");
  records_ = read_teacher_jsonl(in);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!records_[i].text_id.empty()) by_id_.emplace(records_[i].text_id, i);
    if (!records_[i].text.empty()) by_text_.emplace(records_[i].text, i);
  }
  if (!records_.empty()) {
    const int stored = static_cast<int>(records_.front().vector.size());
    if (stored != source_.dimension)
      projection_ = projection_matrix(stored, source_.dimension, source_.projection_seed);
  }
}

TeacherEmbedding TeacherProvider::embed(const std::string& key) const {
  if (source_.mode == TeacherMode::kSynthetic)
    return {synthetic_embedding(key, source_.dimension, source_.seed), "synthetic"};
  auto it = by_id_.find(key);
  if (it == by_id_.end()) it = by_text_.find(key);
  if (it == by_text_.end())
    throw LookupError("no teacher vector for '" + key + "' in " + source_.path);
  const TeacherRecord& r = records_[it->second];
  const double norm = r.vector.norm();
  if (norm == 0.0)
    throw ValidationError("zero teacher vector for '" + key + "'");
  if (projection_.size() == 0) return {r.vector, source_.path};
  Vector y = projection_ * r.vector;
  const double ny = y.norm();
  if (ny == 0.0)
    throw ValidationError("teacher vector for '" + key + "' projects to zero");
  return {y * (norm / ny), source_.path};
}

std::vector<TeacherEmbedding> TeacherProvider::embed_all(
    const std::vector<std::string>& keys) const {
  std::vector<TeacherEmbedding> out;
  out.reserve(keys.size());
  for (const auto& k : keys) out.push_back(embed(k));
  return out;
}

TeacherEmbedding teacher_embedding(const TeacherSource& source,
                                   const std::string& text) {
  return TeacherProvider(source).embed(text);
}

SimilarityMatrix teacher_matrix(const TeacherProvider& provider,
                                const std::vector<std::string>& texts) {
  if (texts.size() < 2)
    throw ArgumentError("teacher_matrix needs at least 2 texts");
  std::vector<Vector> vs;
  for (const auto& e : provider.embed_all(texts)) vs.push_back(e.vector);
  return similarity_matrix(vs);
}

}  // namespace protolab
