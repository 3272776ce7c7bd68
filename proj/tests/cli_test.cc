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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "gtest/gtest.h"
#include "json.hpp"
#include "protolab/experiment.h"
#include "protolab/runner.h"
#include "protolab/teacher.h"

namespace protolab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<json> read_jsonl(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

// Rows of a simple CSV (no quoted fields in the files checked here).
std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

class RunnerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("protolab_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    corpus_ = (dir_ / "corpus.jsonl").string();
    std::ofstream out(corpus_);
    const std::vector<std::pair<std::string, std::string>> texts = {
        {"a-0", "The red fish will swim."},      {"a-1", "A red fish can swim."},
        {"a-2", "The old man will read."},       {"b-0", "Why can the dog run?"},
        {"b-1", "Why will a dog run quickly?"},  {"b-2", "Where is the blue book?"},
        {"c-0", "Read the letter now."},         {"c-1", "Open the small door."}};
    for (const auto& [id, text] : texts)
      out << json{{"id", id}, {"text", text}, {"label", "simple"},
                  {"variant", "original"}, {"source_id", id}}
                 .dump()
          << '\n';
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small model and short budgets; the runs only need to be real, not good.
  ExperimentConfig base(Experiment e, const std::string& out) const {
    ExperimentConfig c;
    c.experiment = e;
    c.seed = 17;
    c.output_dir = (dir_ / out).string();
    c.model.config.hidden_size = 16;
    c.model.config.num_layers = 1;
    c.model.config.num_heads = 2;
    c.model.config.mlp_hidden = 32;
    c.model.config.vocab_size = 64;
    c.model.config.max_positions = 16;
    c.model.config.seed = 3;
    c.optimizer.learning_rate = 0.05;
    c.stopping.max_iterations = 40;
    c.corpus.path = corpus_;
    c.corpus.max_length = 8;
    return c;
  }

  fs::path dir_;
  std::string corpus_;
};

TEST(ConfigTest, BatchSizeDefaultsToSix) {
  EXPECT_EQ(RegularizerConfig{}.batch_size, 6);
  EXPECT_EQ(ExperimentConfig{}.regularizer.batch_size, 6);
}

TEST(ConfigTest, SeedIsMandatory) {
  ExperimentConfig c;
  c.output_dir = "x";
  EXPECT_THROW(c.validate(), ConfigError);
  c.seed = 0;
  EXPECT_NO_THROW(c.validate());
}

TEST(ConfigTest, SerializeParseRoundTrip) {
  ExperimentConfig c;
  c.experiment = Experiment::kRelational;
  c.seed = 123456789012345ULL;
  c.output_dir = "/tmp/out";
  c.workers = 3;
  c.init = "teacher";
  c.optimizer.learning_rate = 0.1 + 0.2;  // not a short decimal
  c.regularizer.lambda_rel = 1.0 / 3.0;
  c.regularizer.rel_kind = RelationalKind::kHuber;
  c.regularizer.shared_m = true;
  c.teacher.mode = TeacherMode::kSynthetic;
  c.teacher.seed = 77;
  c.relational.shared_m = {true, false};
  c.relational.lambda_rel = {0.0, 0.25, 4.0};
  c.noise.kinds = {"uniform"};
  c.noise.alphas = {0.0, 1e-3};
  c.attention.layers = {1, 0};
  c.project.vectors = "both";
  c.project.tsne.perplexity = 7.5;
  c.datagen.augment.char_mod_probability = 0.15;

  const json j = config_to_json(c);
  const ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(back.optimizer.learning_rate, c.optimizer.learning_rate);
  EXPECT_EQ(back.regularizer.lambda_rel, c.regularizer.lambda_rel);
  EXPECT_EQ(*back.seed, *c.seed);

  // Through text as well.
  const ExperimentConfig text = config_from_json(json::parse(j.dump(2)));
  EXPECT_EQ(config_hash(text), config_hash(c));
}

TEST(ConfigTest, HashTracksContent) {
  ExperimentConfig a;
  a.seed = 1;
  ExperimentConfig b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.optimizer.weight_decay = 0.02;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(ConfigTest, StrictKeysAndSchemaVersion) {
  json j = config_to_json(ExperimentConfig{});
  j["optimizer"]["learnig_rate"] = 0.1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = config_to_json(ExperimentConfig{});
  j["schema_version"] = 2;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = {{"schema_version", 1}, {"experiment", "teleport"}};
  EXPECT_THROW(config_from_json(j), ConfigError);
  // Missing sections keep their defaults.
  const ExperimentConfig c =
      config_from_json({{"schema_version", 1}, {"experiment", "noise"}, {"seed", 4}});
  EXPECT_EQ(c.experiment, Experiment::kNoise);
  EXPECT_EQ(c.noise.trials, 10);
}

TEST(ConfigTest, PresetsParse) {
  const fs::path dir = fs::path(PROTOLAB_DATA_DIR).parent_path() / "configs";
  std::set<std::string> seen;
  for (const auto& entry : fs::directory_iterator(dir)) {
    SCOPED_TRACE(entry.path().string());
    const ExperimentConfig c = load_config(entry.path().string());
    ASSERT_TRUE(c.seed.has_value());
    seen.insert(entry.path().filename().string());
    // Relative paths resolve against the config's directory.
    if (!c.corpus.path.empty()) EXPECT_TRUE(fs::exists(c.corpus.path)) << c.corpus.path;
    if (c.experiment != Experiment::kProject) EXPECT_NO_THROW(c.validate());
  }
  EXPECT_TRUE(seen.count("anchor_0.02.json"));
  EXPECT_TRUE(seen.count("anchor_0.5.json"));
  EXPECT_EQ(load_config((dir / "anchor_0.02.json").string()).anchor.lambdas,
            std::vector<double>{0.02});
  EXPECT_EQ(load_config((dir / "anchor_0.5.json").string()).anchor.lambdas,
            std::vector<double>{0.5});
  const ExperimentConfig rel = load_config((dir / "relational.json").string());
  EXPECT_EQ(rel.regularizer.batch_size, 6);
  EXPECT_EQ(rel.relational.shared_m, (std::vector<bool>{false, true}));
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  for (int workers : {1, 3, 16}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(101, workers, [&](int i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](int) { FAIL(); });
}

TEST_F(RunnerTest, EmptyCorpusFailsBeforeModelWork) {
  const std::string empty = (dir_ / "empty.jsonl").string();
  std::ofstream(empty).close();
  // A weights file that is not loadable: reaching the model would raise
  // LoadError instead.
  const std::string bogus = (dir_ / "bogus.bin").string();
  std::ofstream(bogus) << "not weights";
  ExperimentConfig c = base(Experiment::kReconstruct, "out");
  c.corpus.path = empty;
  c.model.path = bogus;
  EXPECT_THROW(run_experiment(c), ValidationError);

  // A filter that removes everything is the same.
  c = base(Experiment::kReconstruct, "out2");
  c.corpus.variants = {"semantic"};
  c.model.path = bogus;
  EXPECT_THROW(run_experiment(c), ValidationError);
}

TEST_F(RunnerTest, MissingSeedOrFileIsConfigError) {
  ExperimentConfig c = base(Experiment::kReconstruct, "out");
  c.seed.reset();
  EXPECT_THROW(run_experiment(c), ConfigError);
  c = base(Experiment::kReconstruct, "out");
  c.corpus.path = (dir_ / "nope.jsonl").string();
  EXPECT_THROW(run_experiment(c), ConfigError);
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(RunnerTest, ReconstructDeterministicAcrossRunsAndWorkers) {
  ExperimentConfig c = base(Experiment::kReconstruct, "r1");
  const RunRecord a = run_experiment(c);
  c.output_dir = (dir_ / "r2").string();
  c.workers = 4;
  const RunRecord b = run_experiment(c);
  EXPECT_EQ(a.failures(), 0);
  EXPECT_EQ(a.records.size(), 8u);
  const std::string steps = slurp(dir_ / "r1" / "steps.jsonl");
  EXPECT_FALSE(steps.empty());
  EXPECT_EQ(steps, slurp(dir_ / "r2" / "steps.jsonl"));
  EXPECT_EQ(slurp(dir_ / "r1" / "pairs.jsonl"), slurp(dir_ / "r2" / "pairs.jsonl"));
}

TEST_F(RunnerTest, StepLinesParseIntoMetricSchema) {
  run_experiment(base(Experiment::kReconstruct, "out"));
  const auto lines = read_jsonl(dir_ / "out" / "steps.jsonl");
  ASSERT_FALSE(lines.empty());
  std::map<std::string, int> last_step;
  for (const auto& l : lines) {
    ASSERT_TRUE(l.at("record").is_string());
    ASSERT_TRUE(l.at("step").is_number_integer());
    const double ce = l.at("ce_loss").get<double>();
    const double acc = l.at("token_accuracy").get<double>();
    EXPECT_GE(ce, 0.0);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
    // Steps of a record are consecutive from 1.
    const std::string id = l["record"];
    EXPECT_EQ(l["step"].get<int>(), last_step[id] + 1);
    last_step[id] = l["step"];
  }
  EXPECT_EQ(last_step.size(), 8u);

  // The pairs file agrees with the final step of each record.
  for (const auto& p : read_jsonl(dir_ / "out" / "pairs.jsonl")) {
    EXPECT_EQ(p.at("iterations").get<int>(), last_step[p.at("id")]);
    EXPECT_EQ(p.at("e").size(), 16u);
    EXPECT_EQ(p.at("m").size(), 16u);
  }
}

TEST_F(RunnerTest, RefusesToOverwriteWithoutForce) {
  const ExperimentConfig c = base(Experiment::kReconstruct, "out");
  fs::create_directories(dir_ / "out");
  std::ofstream(dir_ / "out" / "keep.txt") << "mine";
  EXPECT_THROW(run_experiment(c), OutputExistsError);
  EXPECT_EQ(slurp(dir_ / "out" / "keep.txt"), "mine");
  RunOptions force;
  force.force = true;
  EXPECT_NO_THROW(run_experiment(c, force));
  EXPECT_FALSE(fs::exists(dir_ / "out" / "keep.txt"));
  // An existing empty directory is fine.
  fs::create_directories(dir_ / "empty");
  EXPECT_NO_THROW(run_experiment(base(Experiment::kReconstruct, "empty")));
}

TEST_F(RunnerTest, RecordHashChecked) {
  run_experiment(base(Experiment::kReconstruct, "out"));
  const RunRecord rec = read_run_record((dir_ / "out").string());
  EXPECT_EQ(rec.config_hash, config_hash(rec.config));
  EXPECT_EQ(*rec.config.seed, 17u);
  EXPECT_GT(rec.wall_seconds, 0.0);
  for (const auto& a : rec.artifacts) EXPECT_TRUE(fs::exists(dir_ / "out" / a)) << a;

  json j = json::parse(slurp(dir_ / "out" / "record.json"));
  j["config"]["optimizer"]["learning_rate"] = 0.5;
  std::ofstream(dir_ / "out" / "record.json") << j.dump();
  EXPECT_THROW(read_run_record((dir_ / "out").string()), ValidationError);
}

TEST_F(RunnerTest, ReplayFromSnapshotIsBitExact) {
  run_experiment(base(Experiment::kReconstruct, "first"));
  ExperimentConfig snap = load_config((dir_ / "first" / "config.json").string());
  snap.output_dir = (dir_ / "replay").string();
  run_experiment(snap);
  EXPECT_EQ(slurp(dir_ / "first" / "steps.jsonl"), slurp(dir_ / "replay" / "steps.jsonl"));
}

TEST_F(RunnerTest, InputsNotModified) {
  const std::string before = slurp(corpus_);
  const auto mtime = fs::last_write_time(corpus_);
  run_experiment(base(Experiment::kReconstruct, "out"));
  EXPECT_EQ(slurp(corpus_), before);
  EXPECT_EQ(fs::last_write_time(corpus_), mtime);
}

TEST_F(RunnerTest, AnchorFromTeacherStartsAtCosineOne) {
  ExperimentConfig c = base(Experiment::kAnchor, "out");
  c.anchor.lambdas = {0.0, 0.5};
  c.regularizer.init_from_teacher = true;
  run_experiment(c);
  const auto lines = read_jsonl(dir_ / "out" / "steps.jsonl");
  int first_steps = 0;
  for (const auto& l : lines) {
    // Cosine to the teacher is logged on every step.
    ASSERT_EQ(l.at("cos_to_teacher").size(), 1u);
    if (l.at("step") == 1) {
      ++first_steps;
      EXPECT_NEAR(l["cos_to_teacher"][0].get<double>(), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(first_steps, 16);
  const auto rows = read_csv(dir_ / "out" / "anchor.csv");
  ASSERT_EQ(rows.size(), 17u);
  EXPECT_EQ(rows[0][0], "id");
}

TEST_F(RunnerTest, AnchorLambdasArePaired) {
  // lambda = 0 must match the plain per-record seed whichever grid it sits in.
  ExperimentConfig c = base(Experiment::kAnchor, "grid");
  c.anchor.lambdas = {0.0, 0.5};
  run_experiment(c);
  c.anchor.lambdas = {0.0};
  c.output_dir = (dir_ / "alone").string();
  run_experiment(c);
  std::map<std::string, std::string> grid, alone;
  for (const auto& p : read_jsonl(dir_ / "grid" / "pairs.jsonl"))
    if (p["run"]["lambda_anchor"] == 0.0) grid[p["id"]] = p["e"].dump();
  for (const auto& p : read_jsonl(dir_ / "alone" / "pairs.jsonl")) alone[p["id"]] = p["e"].dump();
  EXPECT_EQ(grid, alone);
}

TEST_F(RunnerTest, PerRecordFailureIsRecordedAndRunContinues) {
  // File teacher that lacks one record: that record fails, the rest run.
  std::vector<TeacherRecord> recs;
  for (const char* id : {"a-0", "a-1", "a-2", "b-0", "b-1", "b-2", "c-0"})
    recs.push_back({id, "", Vector::Ones(16)});
  const std::string tpath = (dir_ / "teacher.jsonl").string();
  {
    std::ofstream out(tpath);
    write_teacher_jsonl(out, recs);
  }
  ExperimentConfig c = base(Experiment::kAnchor, "out");
  c.teacher.mode = TeacherMode::kFile;
  c.teacher.path = tpath;
  const RunRecord rec = run_experiment(c);
  ASSERT_EQ(rec.records.size(), 8u);
  EXPECT_EQ(rec.failures(), 1);
  for (const auto& r : rec.records) {
    if (r.id.rfind("c-1", 0) == 0) {
      EXPECT_EQ(r.status, "failed");
      EXPECT_NE(r.error.find("c-1"), std::string::npos) << r.error;
    } else {
      EXPECT_EQ(r.status, "ok");
    }
  }
  EXPECT_EQ(read_jsonl(dir_ / "out" / "pairs.jsonl").size(), 7u);
  const RunRecord back = read_run_record((dir_ / "out").string());
  EXPECT_EQ(back.failures(), 1);
}

TEST_F(RunnerTest, RelationalEmitsBothVariantsAndPairedAccuracies) {
  ExperimentConfig c = base(Experiment::kRelational, "out");
  c.regularizer.batch_size = 3;  // 8 records: two batches, two skipped
  c.relational.shared_m = {false, true};
  c.relational.lambda_rel = {0.0, 1.0};
  const RunRecord rec = run_experiment(c);
  int skipped = 0;
  for (const auto& r : rec.records) skipped += r.status == "skipped";
  EXPECT_EQ(skipped, 2);
  EXPECT_EQ(rec.failures(), 0);

  const auto rel = read_csv(dir_ / "out" / "relational.csv");
  ASSERT_EQ(rel.size(), 1u + 2 * 4);
  std::set<std::pair<std::string, std::string>> variants;
  for (std::size_t i = 1; i < rel.size(); ++i) variants.insert({rel[i][1], rel[i][2]});
  EXPECT_EQ(variants.size(), 4u);

  // Every (batch, example) has an accuracy under each variant.
  const auto acc = read_csv(dir_ / "out" / "accuracies.csv");
  ASSERT_EQ(acc.size(), 1u + 2 * 4 * 3);
  std::map<std::string, int> per_id;
  for (std::size_t i = 1; i < acc.size(); ++i) ++per_id[acc[i][3]];
  EXPECT_EQ(per_id.size(), 6u);
  for (const auto& [id, n] : per_id) EXPECT_EQ(n, 4) << id;

  // Shared m shows up as identical m vectors within a batch.
  std::map<std::string, std::set<std::string>> ms;
  for (const auto& p : read_jsonl(dir_ / "out" / "pairs.jsonl"))
    if (p["run"]["shared_m"] == true && p["run"]["lambda_rel"] == 1.0)
      ms[p["run"]["batch"]].insert(p["m"].dump());
  ASSERT_EQ(ms.size(), 2u);
  for (const auto& [b, set] : ms) EXPECT_EQ(set.size(), 1u) << b;
}

TEST_F(RunnerTest, NoiseTables) {
  ExperimentConfig c = base(Experiment::kNoise, "out");
  c.corpus.limit = 2;
  c.noise.trials = 2;
  run_experiment(c);
  const auto rows = read_csv(dir_ / "out" / "noise.csv");
  ASSERT_EQ(rows.size(), 1u + 2 * 4 * 6);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i][2] == "0") EXPECT_EQ(rows[i][3], rows[i][6]);  // alpha 0 = baseline
  const auto summary = read_csv(dir_ / "out" / "noise_summary.csv");
  ASSERT_EQ(summary.size(), 1u + 4 * 6);
  EXPECT_EQ(summary[1][0], "gaussian");
  EXPECT_EQ(summary[2][1], "0.05");
}

TEST_F(RunnerTest, AttentionFromStoredPairs) {
  ExperimentConfig r = base(Experiment::kReconstruct, "pairs");
  r.corpus.limit = 3;
  run_experiment(r);
  ExperimentConfig c = base(Experiment::kAttention, "att");
  c.attention.pairs_from = (dir_ / "pairs" / "pairs.jsonl").string();
  c.corpus.path.clear();
  const RunRecord rec = run_experiment(c);
  EXPECT_EQ(rec.records.size(), 3u);
  EXPECT_FALSE(fs::exists(dir_ / "att" / "steps.jsonl"));  // nothing optimized
  const auto rows = read_csv(dir_ / "att" / "attention.csv");
  // Query 0 attends only to e.
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i][3] == "0") EXPECT_EQ(rows[i][4], "1");
  const auto mean = read_csv(dir_ / "att" / "attention_mean.csv");
  ASSERT_EQ(mean.size(), 2u);  // header + one layer
  EXPECT_EQ(mean[1][1], "1");
}

TEST_F(RunnerTest, ProjectLabelsAndVectors) {
  ExperimentConfig r = base(Experiment::kReconstruct, "pairs");
  run_experiment(r);
  ExperimentConfig c;
  c.experiment = Experiment::kProject;
  c.seed = 2;
  c.output_dir = (dir_ / "proj").string();
  c.project.pairs_from = (dir_ / "pairs" / "pairs.jsonl").string();
  c.project.vectors = "both";
  c.project.label_by = "source_id";
  c.project.tsne.iterations = 300;
  run_experiment(c);
  const auto rows = read_csv(dir_ / "proj" / "projection.csv");
  ASSERT_EQ(rows.size(), 1u + 16);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"id", "x", "y", "label"}));
  EXPECT_EQ(rows[1][0], "a-0:e");
  EXPECT_EQ(rows[1][3], "a-0:e");
  EXPECT_EQ(rows[2][3], "a-0:m");
  EXPECT_FALSE(read_jsonl(dir_ / "proj" / "steps.jsonl").empty());
}

TEST_F(RunnerTest, DatagenWritesLinkedCorpus) {
  ExperimentConfig c;
  c.experiment = Experiment::kDatagen;
  c.seed = 9;
  c.output_dir = (dir_ / "dg").string();
  c.datagen.lexicon = std::string(PROTOLAB_DATA_DIR) + "/lexicon.tsv";
  c.datagen.grammars = std::string(PROTOLAB_DATA_DIR) + "/grammars";
  c.datagen.per_class = 3;
  c.datagen.augment.count = 2;
  c.datagen.paraphrases = std::string(PROTOLAB_DATA_DIR) + "/samples/paraphrases.json";
  c.datagen.originals = std::string(PROTOLAB_DATA_DIR) + "/samples/instructions.jsonl";
  const RunRecord rec = run_experiment(c);
  EXPECT_EQ(rec.failures(), 0);
  const auto corpus = load_corpus((dir_ / "dg" / "corpus.jsonl").string());
  std::map<std::string, const CorpusRecord*> by_id;
  for (const auto& r : corpus) by_id[r.id] = &r;
  int lexical = 0, semantic = 0;
  for (const auto& r : corpus) {
    ASSERT_TRUE(by_id.count(r.source_id)) << r.id;
    if (r.variant == Variant::kLexical) {
      ++lexical;
      EXPECT_NE(r.text, by_id[r.source_id]->text);
      EXPECT_EQ(r.label, by_id[r.source_id]->label);
    }
    semantic += r.variant == Variant::kSemantic;
  }
  EXPECT_EQ(lexical, 7 * 3 * 2);
  EXPECT_EQ(semantic, 18);
  std::ifstream vin(dir_ / "dg" / "vocabulary.json");
  EXPECT_GT(read_vocabulary(vin).size(), 50);

  // Same seed, same corpus.
  c.output_dir = (dir_ / "dg2").string();
  run_experiment(c);
  EXPECT_EQ(slurp(dir_ / "dg" / "corpus.jsonl"), slurp(dir_ / "dg2" / "corpus.jsonl"));
}

class CliTest : public RunnerTest {
 protected:
  int cli(const std::string& args) {
    const std::string cmd = std::string(PROTOLAB_CLI_PATH) + " " + args + " >" +
                            (dir_ / "stdout.txt").string() + " 2>" +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

TEST_F(CliTest, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(cli("teleport --seed 1"), 2);
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("reconstruct --bogus-flag"), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST_F(CliTest, FlagsOverrideConfigAndCollisionExitCode) {
  ExperimentConfig c = base(Experiment::kReconstruct, "ignored");
  c.corpus.limit = 2;
  c.seed = 1;
  const std::string cfg = (dir_ / "cfg.json").string();
  save_config(cfg, c);
  const std::string out = (dir_ / "run").string();
  ASSERT_EQ(cli("reconstruct -q --config " + cfg + " --out " + out + " --seed 5 --workers 2"), 0)
      << slurp(dir_ / "stderr.txt");
  const RunRecord rec = read_run_record(out);
  EXPECT_EQ(*rec.config.seed, 5u);
  EXPECT_EQ(rec.config.workers, 2);
  EXPECT_FALSE(fs::exists(dir_ / "ignored"));
  EXPECT_NE(slurp(dir_ / "stdout.txt").find(rec.run_id), std::string::npos);

  EXPECT_EQ(cli("reconstruct -q --config " + cfg + " --out " + out), 3);
  EXPECT_EQ(cli("reconstruct -q --config " + cfg + " --out " + out + " --force"), 0);
  // A config for another experiment is refused.
  EXPECT_EQ(cli("noise -q --config " + cfg + " --out " + (dir_ / "n").string()), 2);
  // No seed anywhere.
  EXPECT_EQ(cli("reconstruct -q --out " + (dir_ / "noseed").string()), 2);
}

}  // namespace
}  // namespace protolab
