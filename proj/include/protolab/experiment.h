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

#ifndef PROTOLAB_EXPERIMENT_H_
#define PROTOLAB_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolab/analysis.h"
#include "protolab/datagen/augment.h"
#include "protolab/model.h"
#include "protolab/prototoken.h"
#include "protolab/regularizers.h"
#include "protolab/teacher.h"

namespace protolab {

inline constexpr int kConfigSchemaVersion = 1;

enum class Experiment {
  kReconstruct,
  kAnchor,
  kRelational,
  kNoise,
  kAttention,
  kProject,
  kDatagen,
};

std::string to_string(Experiment experiment);
Experiment parse_experiment(const std::string& name);
const std::vector<Experiment>& all_experiments();

struct ModelSourceConfig {
  std::string path;  // weights file; empty selects random init
  ModelConfig config;
  RandomInitOptions init;
};

// Where target sequences come from: a corpus JSONL file tokenized with a
// vocabulary built from it (or loaded), or uniform random token ids.
struct CorpusConfig {
  std::string path;
  std::string vocabulary;  // optional vocabulary JSON
  std::vector<std::string> variants;  // keep only these; empty keeps all
  int limit = 0;        // 0 keeps every record
  int max_length = 16;  // longer token sequences are truncated
  int random_count = 10;
  int random_length = 16;
};

struct AnchorRunConfig {
  std::vector<double> lambdas = {0.02};
};

struct RelationalRunConfig {
  std::vector<bool> shared_m = {false};
  std::vector<double> lambda_rel = {0.0, 1.0};
};

struct NoiseRunConfig {
  std::vector<std::string> kinds = {"gaussian", "uniform", "exponential",
                                    "sinusoidal"};
  std::vector<double> alphas = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0};
  int trials = 10;
};

struct AttentionRunConfig {
  std::vector<int> layers;   // empty selects every layer
  std::string pairs_from;    // pairs.jsonl of an earlier run; empty optimizes
};

struct ProjectRunConfig {
  std::string pairs_from;
  std::string vectors = "e";          // e | m | both
  std::string label_by = "source_id"; // source_id | label | variant
  ProjectionConfig tsne;
};

struct DatagenRunConfig {
  std::string lexicon;
  std::string grammars;  // directory with <class>.cfg files
  int per_class = 20;
  int max_depth = 10;
  bool lexical = true;
  AugmentConfig augment;
  std::string paraphrases;  // optional paraphrase JSON
  std::string originals;    // corpus the paraphrase ids refer to
};

// One experiment run. Every field has a default except the seed, which must
// be given (there is no wall-clock seeding).
struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  Experiment experiment = Experiment::kReconstruct;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  int workers = 1;
  ModelSourceConfig model;
  OptimizerConfig optimizer;
  StoppingCriteria stopping;
  std::string init = "normal";  // normal | teacher
  RegularizerConfig regularizer;
  TeacherSource teacher;  // dimension follows the model
  CorpusConfig corpus;
  AnchorRunConfig anchor;
  RelationalRunConfig relational;
  NoiseRunConfig noise;
  AttentionRunConfig attention;
  ProjectRunConfig project;
  DatagenRunConfig datagen;

  // ConfigError on bad values, a missing seed or a referenced file that does
  // not exist.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& config);
// Unknown keys are errors. Relative paths are resolved against base_dir when
// it is non-empty.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& config);

// FNV-1a over the canonical JSON serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace protolab

#endif  // PROTOLAB_EXPERIMENT_H_
