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

#ifndef PROTOLAB_RUNNER_H_
#define PROTOLAB_RUNNER_H_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolab/common.h"
#include "protolab/datagen/corpus.h"
#include "protolab/experiment.h"

namespace protolab {

// The output directory exists and is not empty, and --force was not given.
class OutputExistsError : public Error {
 public:
  using Error::Error;
};

struct RecordStatus {
  std::string id;
  std::string status;  // ok | failed | skipped
  std::string error;
};

// What a run leaves in its output directory:
//   config.json   the effective config, loadable with --config
//   record.json   run id, config hash + inline copy, per-record status,
//                 artifact list, wall-clock duration
//   steps.jsonl   per-step metrics, one line per (record, step)
//   ...           experiment artifacts (pairs.jsonl, CSV tables)
struct RunRecord {
  std::string run_id;
  std::string out_dir;
  ExperimentConfig config;
  std::string config_hash;
  std::vector<RecordStatus> records;
  std::vector<std::string> artifacts;  // file names relative to out_dir
  double wall_seconds = 0.0;

  int failures() const;
};

struct RunOptions {
  bool force = false;
  std::ostream* log = nullptr;  // progress lines; null is silent
};

// Creates (or with force empties) the directory. Throws OutputExistsError for
// a non-empty directory without force.
void prepare_output_dir(const std::string& dir, bool force);

// Validates the config, runs the experiment into config.output_dir and
// persists the record. Config errors abort before any model work; failures of
// individual records are recorded and the run continues.
RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

RunRecord run_reconstruct(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_anchor(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_relational(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_noise(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_attention(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_project(const ExperimentConfig& config, const RunOptions& options = {});
RunRecord run_datagen(const ExperimentConfig& config, const RunOptions& options = {});

// Reads record.json and checks the stored hash against the inline config.
// Throws ValidationError on a mismatch.
RunRecord read_run_record(const std::string& dir);

// One target sequence with its corpus metadata.
struct TargetRecord {
  CorpusRecord record;
  TargetSequence targets;
};

// Corpus records after the variant filter and limit. ValidationError when
// nothing is left.
std::vector<CorpusRecord> select_records(const ExperimentConfig& config);

// Targets for a config: tokenized corpus records (filtered, limited and
// truncated) or seeded random sequences. The tokenizer is returned through
// `tokenizer` when non-null.
std::vector<TargetRecord> load_targets(const ExperimentConfig& config,
                                       const ModelConfig& model,
                                       Tokenizer* tokenizer = nullptr);

// Runs fn(0..n-1) on up to `workers` threads. Each index is visited once; the
// caller stores results by index so output order never depends on timing.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace protolab

#endif  // PROTOLAB_RUNNER_H_
