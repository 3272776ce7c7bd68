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

#include "protolab/runner.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "protolab/analysis.h"
#include "protolab/json_util.h"
#include "protolab/noise.h"
#include "protolab/random.h"
#include "protolab/regularizers.h"
#include "protolab/teacher.h"

namespace protolab {

using nlohmann::json;
namespace fs = std::filesystem;

int RunRecord::failures() const {
  return static_cast<int>(std::count_if(records.begin(), records.end(),
                                        [](const RecordStatus& r) {
                                          return r.status == "failed";
                                        }));
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

void prepare_output_dir(const std::string& dir, bool force) {
  if (dir.empty()) throw ConfigError("no output directory given");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir))
      throw OutputExistsError("output path '" + dir + "' is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force)
        throw OutputExistsError("output directory '" + dir +
                                "' is not empty; pass --force to overwrite");
      for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry);
    }
  }
  fs::create_directories(dir);
}

namespace {

// Everything one unit of work produces. Workers fill their own slot; the
// single writer below serializes the slots in index order.
struct TaskOutput {
  std::string id;
  std::string status = "ok";
  std::string error;
  std::vector<json> steps;
  std::vector<json> pairs;
  std::vector<std::string> rows;
  json extra;
};

class Run {
 public:
  Run(const ExperimentConfig& config, const RunOptions& options)
      : config_(config), options_(options),
        start_(std::chrono::steady_clock::now()) {
    config_.validate();
    prepare_output_dir(config_.output_dir, options_.force);
    save_config(path("config.json"), config_);
  }

  const ExperimentConfig& config() const { return config_; }
  std::uint64_t seed() const { return *config_.seed; }
  std::string path(const std::string& name) const {
    return (fs::path(config_.output_dir) / name).string();
  }

  void log(const std::string& line) const {
    if (options_.log) *options_.log << "[" << to_string(config_.experiment) << "] " << line << '\n';
  }

  std::ofstream open(const std::string& name) {
    const fs::path p = fs::path(config_.output_dir) / name;
    fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    artifacts_.push_back(name);
    return out;
  }

  // Runs tasks on the pool, catching per-task errors as data.
  std::vector<TaskOutput> execute(int n, const std::function<std::string(int)>& id_of,
                                  const std::function<void(int, TaskOutput&)>& task) {
    std::vector<TaskOutput> outs(n);
    std::atomic<int> done{0};
    parallel_for(n, config_.workers, [&](int i) {
      TaskOutput& o = outs[i];
      o.id = id_of(i);
      try {
        task(i, o);
      } catch (const std::exception& e) {
        o = TaskOutput{};
        o.id = id_of(i);
        o.status = "failed";
        o.error = e.what();
      }
      const int k = ++done;
      if (options_.log && (k == n || k % std::max(1, n / 10) == 0))
        log(std::to_string(k) + "/" + std::to_string(n) + " done");
    });
    return outs;
  }

  // Single appender for the per-task streams.
  void write_outputs(const std::vector<TaskOutput>& outs,
                     const std::string& summary_name = "",
                     const std::string& summary_header = "") {
    bool any_steps = false, any_pairs = false;
    for (const auto& o : outs) {
      any_steps |= !o.steps.empty();
      any_pairs |= !o.pairs.empty();
      records_.push_back({o.id, o.status, o.error});
    }
    if (any_steps) {
      auto out = open("steps.jsonl");
      for (const auto& o : outs)
        for (const auto& s : o.steps) out << s.dump() << '\n';
    }
    if (any_pairs) {
      auto out = open("pairs.jsonl");
      for (const auto& o : outs)
        for (const auto& p : o.pairs) out << p.dump() << '\n';
    }
    if (!summary_name.empty()) {
      auto out = open(summary_name);
      out << summary_header << '\n';
      for (const auto& o : outs)
        for (const auto& r : o.rows) out << r << '\n';
    }
  }

  void add_record(RecordStatus status) { records_.push_back(std::move(status)); }

  RunRecord finish() {
    RunRecord rec;
    rec.config = config_;
    rec.config_hash = config_hash(config_);
    rec.run_id = to_string(config_.experiment) + "-" + rec.config_hash.substr(0, 8) +
                 "-s" + std::to_string(seed());
    rec.out_dir = config_.output_dir;
    rec.records = records_;
    rec.artifacts = artifacts_;
    rec.artifacts.insert(rec.artifacts.begin(), "config.json");
    rec.artifacts.push_back("record.json");
    rec.wall_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start_)
                           .count();
    json records = json::array();
    for (const auto& r : rec.records)
      records.push_back({{"id", r.id}, {"status", r.status}, {"error", r.error}});
    const json j = {{"run_id", rec.run_id},
                    {"experiment", to_string(config_.experiment)},
                    {"seed", seed()},
                    {"config_hash", rec.config_hash},
                    {"config", config_to_json(config_)},
                    {"records", records},
                    {"artifacts", rec.artifacts},
                    {"wall_clock_seconds", rec.wall_seconds}};
    std::ofstream out(path("record.json"));
    out << j.dump(2) << '\n';
    log("wrote " + std::to_string(rec.artifacts.size()) + " files to " +
        config_.output_dir + " (" + std::to_string(rec.failures()) + " failed)");
    return rec;
  }

 private:
  ExperimentConfig config_;
  RunOptions options_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> artifacts_;
  std::vector<RecordStatus> records_;
};

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

ModelWeights load_model(const ExperimentConfig& c) {
  return c.model.path.empty() ? init_random_weights(c.model.config, c.model.init)
                              : load_weights(c.model.path);
}

TeacherProvider make_teacher(const ExperimentConfig& c, int dim) {
  TeacherSource src = c.teacher;
  src.dimension = dim;
  return TeacherProvider(src);
}

// Synthetic teachers embed the text; file teachers are keyed by record id,
// falling back to the text.
TeacherEmbedding teacher_for(const TeacherProvider& p, const CorpusRecord& r) {
  if (p.source().mode == TeacherMode::kSynthetic) return p.embed(r.text);
  try {
    return p.embed(r.id);
  } catch (const LookupError&) {
  }
  try {
    return p.embed(r.text);
  } catch (const LookupError&) {
    throw LookupError("no teacher vector for record '" + r.id + "' (by id or text) in " +
                      p.source().path);
  }
}

json pair_json(const TargetRecord& t, const ProtoTokenPair& pair, const json& run,
               bool converged, int iterations, double accuracy) {
  return {{"id", t.record.id},
          {"label", t.record.label},
          {"variant", to_string(t.record.variant)},
          {"source_id", t.record.source_id},
          {"text", t.record.text},
          {"targets", t.targets.tokens},
          {"run", run},
          {"converged", converged},
          {"iterations", iterations},
          {"final_accuracy", accuracy},
          {"e", to_json_array(pair.e)},
          {"m", to_json_array(pair.m)}};
}

struct StoredPair {
  TargetRecord target;
  ProtoTokenPair pair;
  json run;
};

std::vector<StoredPair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open pairs file '" + path + "'");
  std::vector<StoredPair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      StoredPair p;
      p.target.record.id = j.at("id").get<std::string>();
      p.target.record.label = j.at("label").get<std::string>();
      p.target.record.variant = parse_variant(j.at("variant").get<std::string>());
      p.target.record.source_id = j.at("source_id").get<std::string>();
      p.target.record.text = j.value("text", std::string());
      p.target.targets.tokens = j.at("targets").get<std::vector<int>>();
      p.run = j.value("run", json::object());
      p.pair.e = vector_from_json(j.at("e"));
      p.pair.m = vector_from_json(j.at("m"));
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw LoadError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ValidationError("pairs file '" + path + "' is empty");
  return out;
}

std::string variant_tag(const json& run) {
  std::string tag;
  for (auto it = run.begin(); it != run.end(); ++it) {
    if (!tag.empty()) tag += ",";
    tag += it.key() + "=" + it.value().dump();
  }
  return tag;
}

}  // namespace

std::vector<CorpusRecord> select_records(const ExperimentConfig& c) {
  std::vector<CorpusRecord> records = load_corpus(c.corpus.path);
  if (!c.corpus.variants.empty()) {
    std::vector<CorpusRecord> kept;
    for (auto& r : records)
      if (std::find(c.corpus.variants.begin(), c.corpus.variants.end(),
                    to_string(r.variant)) != c.corpus.variants.end())
        kept.push_back(std::move(r));
    records = std::move(kept);
  }
  if (c.corpus.limit > 0 && static_cast<int>(records.size()) > c.corpus.limit)
    records.resize(c.corpus.limit);
  if (records.empty())
    throw ValidationError("corpus '" + c.corpus.path + "' has no usable records");
  return records;
}

std::vector<TargetRecord> load_targets(const ExperimentConfig& c, const ModelConfig& model,
                                       Tokenizer* tokenizer_out) {
  const int max_len = std::min(c.corpus.max_length, model.max_positions);
  std::vector<TargetRecord> out;
  if (c.corpus.path.empty()) {
    for (int i = 0; i < c.corpus.random_count; ++i) {
      Rng rng(derive_seed(*c.seed, {0x74617267, static_cast<std::uint64_t>(i)}));
      TargetRecord t;
      const int len = std::min(c.corpus.random_length, model.max_positions);
      for (int k = 0; k < len; ++k)
        t.targets.tokens.push_back(static_cast<int>(rng.below(model.vocab_size)));
      std::string text;
      for (int id : t.targets.tokens) text += (text.empty() ? "" : " ") + std::to_string(id);
      t.record = {"rand-" + std::to_string(i), text, "none", Variant::kOriginal,
                  "rand-" + std::to_string(i)};
      out.push_back(std::move(t));
    }
    if (tokenizer_out) *tokenizer_out = Tokenizer();
    return out;
  }

  std::vector<CorpusRecord> records = select_records(c);

  Tokenizer tok;
  if (!c.corpus.vocabulary.empty()) {
    std::ifstream in(c.corpus.vocabulary);
    tok = read_vocabulary(in);
    if (tok.size() > model.vocab_size)
      throw ConfigError("vocabulary of " + std::to_string(tok.size()) +
                        " exceeds model vocab_size " + std::to_string(model.vocab_size));
  } else {
    std::vector<std::string> texts;
    for (const auto& r : records) texts.push_back(r.text);
    tok = Tokenizer::build(texts, model.vocab_size);
  }
  for (auto& r : records) {
    TargetRecord t;
    t.targets = tokenize(tok, r.text);
    if (static_cast<int>(t.targets.tokens.size()) > max_len)
      t.targets.tokens.resize(max_len);
    t.record = std::move(r);
    out.push_back(std::move(t));
  }
  if (tokenizer_out) *tokenizer_out = std::move(tok);
  return out;
}

namespace {

// Corpus problems surface before the model is built or loaded.
void preflight(const ExperimentConfig& c) {
  if (!c.corpus.path.empty()) select_records(c);
}

void write_vocab_artifact(Run& run, const Tokenizer& tok) {
  if (tok.size() <= 1) return;
  auto out = run.open("vocabulary.json");
  write_vocabulary(out, tok);
}

PairInit pair_init(const ExperimentConfig& c, const TeacherProvider* teacher,
                   const CorpusRecord& r) {
  if (c.init != "teacher") return PairInit::standard_normal();
  return PairInit::from_teacher(teacher_for(*teacher, r).vector);
}

}  // namespace

RunRecord run_reconstruct(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  preflight(c);
  const ModelWeights model = load_model(c);
  Tokenizer tok;
  const auto targets = load_targets(c, model.config(), &tok);
  write_vocab_artifact(run, tok);
  std::optional<TeacherProvider> teacher;
  if (c.init == "teacher") teacher.emplace(make_teacher(c, model.config().hidden_size));

  run.log("reconstructing " + std::to_string(targets.size()) + " sequences");
  const auto outs = run.execute(
      static_cast<int>(targets.size()), [&](int i) { return targets[i].record.id; },
      [&](int i, TaskOutput& o) {
        const auto& t = targets[i];
        t.targets.validate(model.config());
        const auto res = optimize_reconstruction(
            model, t.targets, c.optimizer, c.stopping,
            pair_init(c, teacher ? &*teacher : nullptr, t.record),
            derive_seed(run.seed(), {static_cast<std::uint64_t>(i)}));
        for (int k = 0; k < res.iterations_used; ++k)
          o.steps.push_back({{"record", t.record.id},
                             {"step", k + 1},
                             {"ce_loss", res.loss_history[k]},
                             {"token_accuracy", res.accuracy_history[k]}});
        const double acc = res.accuracy_history.back();
        o.pairs.push_back(pair_json(t, res.pair, json::object(), res.converged,
                                    res.iterations_used, acc));
        o.rows.push_back(csv_field(t.record.id) + "," + csv_field(t.record.label) + "," +
                         std::to_string(t.targets.length()) + "," +
                         std::to_string(res.iterations_used) + "," +
                         (res.converged ? "1" : "0") + "," + fmt(acc) + "," +
                         fmt(res.loss_history.back()));
      });
  run.write_outputs(outs, "results.csv",
                    "id,label,length,iterations,converged,final_accuracy,final_ce");
  return run.finish();
}

RunRecord run_anchor(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  preflight(c);
  const ModelWeights model = load_model(c);
  Tokenizer tok;
  const auto targets = load_targets(c, model.config(), &tok);
  write_vocab_artifact(run, tok);
  const TeacherProvider teacher = make_teacher(c, model.config().hidden_size);
  const int n = static_cast<int>(targets.size());
  const int nl = static_cast<int>(c.anchor.lambdas.size());

  run.log(std::to_string(n) + " sequences x " + std::to_string(nl) + " anchor weights");
  const auto outs = run.execute(
      n * nl,
      [&](int k) {
        return targets[k / nl].record.id + "@lambda_anchor=" + fmt(c.anchor.lambdas[k % nl]);
      },
      [&](int k, TaskOutput& o) {
        const int i = k / nl;
        const double lambda = c.anchor.lambdas[k % nl];
        const auto& t = targets[i];
        t.targets.validate(model.config());
        RegularizerConfig reg = c.regularizer;
        reg.lambda_anchor = lambda;
        reg.lambda_rel = 0.0;
        reg.batch_size = 1;
        reg.init_from_teacher = reg.init_from_teacher || c.init == "teacher";
        // Same seed for every lambda, so the runs are paired.
        const auto res = optimize_batch(
            model, {t.targets}, {teacher_for(teacher, t.record)}, c.optimizer,
            c.stopping, reg, derive_seed(run.seed(), {static_cast<std::uint64_t>(i)}));
        for (const auto& s : res.steps) {
          json line = {{"record", t.record.id}, {"lambda_anchor", lambda}};
          line.update(step_json(s));
          o.steps.push_back(std::move(line));
        }
        const auto& last = res.last();
        o.pairs.push_back(pair_json(t, res.pair(0), {{"lambda_anchor", lambda}},
                                    res.converged, res.iterations_used,
                                    last.mean_accuracy));
        o.rows.push_back(csv_field(t.record.id) + "," + fmt(lambda) + "," +
                         std::to_string(res.iterations_used) + "," +
                         (res.converged ? "1" : "0") + "," + fmt(last.mean_accuracy) +
                         "," + fmt(last.cos_to_teacher[0]) + "," +
                         fmt(res.steps.front().cos_to_teacher[0]));
      });
  run.write_outputs(outs, "anchor.csv",
                    "id,lambda_anchor,iterations,converged,final_accuracy,"
                    "final_cos_to_teacher,initial_cos_to_teacher");
  return run.finish();
}

RunRecord run_relational(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  preflight(c);
  const ModelWeights model = load_model(c);
  Tokenizer tok;
  const auto targets = load_targets(c, model.config(), &tok);
  write_vocab_artifact(run, tok);
  const TeacherProvider teacher = make_teacher(c, model.config().hidden_size);

  const int b = c.regularizer.batch_size;
  const int batches = static_cast<int>(targets.size()) / b;
  for (std::size_t i = static_cast<std::size_t>(batches) * b; i < targets.size(); ++i)
    run.add_record({targets[i].record.id, "skipped", "incomplete final batch"});
  if (batches == 0)
    throw ValidationError("relational run needs at least batch_size = " +
                          std::to_string(b) + " targets");

  struct Variant {
    bool shared;
    double lambda;
  };
  std::vector<Variant> variants;
  for (bool s : c.relational.shared_m)
    for (double l : c.relational.lambda_rel) variants.push_back({s, l});
  const int nv = static_cast<int>(variants.size());

  run.log(std::to_string(batches) + " batches of " + std::to_string(b) + " x " +
          std::to_string(nv) + " variants");
  const auto outs = run.execute(
      batches * nv,
      [&](int k) {
        const auto& v = variants[k % nv];
        return "batch-" + std::to_string(k / nv) + "@shared_m=" +
               (v.shared ? "true" : "false") + ",lambda_rel=" + fmt(v.lambda);
      },
      [&](int k, TaskOutput& o) {
        const int bi = k / nv;
        const Variant v = variants[k % nv];
        std::vector<TargetSequence> seqs;
        std::vector<TeacherEmbedding> teachers;
        for (int j = 0; j < b; ++j) {
          const auto& t = targets[bi * b + j];
          t.targets.validate(model.config());
          seqs.push_back(t.targets);
          teachers.push_back(teacher_for(teacher, t.record));
        }
        RegularizerConfig reg = c.regularizer;
        reg.shared_m = v.shared;
        reg.lambda_rel = v.lambda;
        reg.init_from_teacher = reg.init_from_teacher || c.init == "teacher";
        const auto res = optimize_batch(
            model, seqs, teachers, c.optimizer, c.stopping, reg,
            derive_seed(run.seed(), {static_cast<std::uint64_t>(bi)}));
        const std::string batch_id = "batch-" + std::to_string(bi);
        const json run_info = {{"batch", batch_id},
                               {"shared_m", v.shared},
                               {"lambda_rel", v.lambda}};
        for (const auto& s : res.steps) {
          json line = {{"record", batch_id}, {"shared_m", v.shared}, {"lambda_rel", v.lambda}};
          line.update(step_json(s));
          o.steps.push_back(std::move(line));
        }
        const auto& last = res.last();
        for (int j = 0; j < b; ++j) {
          const auto& t = targets[bi * b + j];
          o.pairs.push_back(pair_json(t, res.pair(j), run_info, res.converged,
                                      res.iterations_used, last.accuracies[j]));
          o.extra.push_back({batch_id, v.shared, v.lambda, t.record.id, last.accuracies[j]});
        }
        auto opt = [](const std::optional<double>& x) {
          return x ? fmt(*x) : std::string();
        };
        o.rows.push_back(batch_id + "," + (v.shared ? "true" : "false") + "," +
                         fmt(v.lambda) + "," + std::to_string(res.iterations_used) +
                         "," + (res.converged ? "1" : "0") + "," +
                         fmt(last.mean_accuracy) + "," + opt(res.final_correlation) +
                         "," + opt(res.mean_step_correlation));
      });
  run.write_outputs(outs, "relational.csv",
                    "batch,shared_m,lambda_rel,iterations,converged,mean_accuracy,"
                    "final_correlation,mean_step_correlation");
  // Per-example accuracies, paired across variants for distribution plots.
  auto acc = run.open("accuracies.csv");
  acc << "batch,shared_m,lambda_rel,id,accuracy\n";
  for (const auto& o : outs)
    for (const auto& row : o.extra)
      acc << row[0].get<std::string>() << ',' << (row[1].get<bool>() ? "true" : "false")
          << ',' << fmt(row[2].get<double>()) << ',' << csv_field(row[3].get<std::string>())
          << ',' << fmt(row[4].get<double>()) << '\n';
  return run.finish();
}

RunRecord run_noise(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  preflight(c);
  const ModelWeights model = load_model(c);
  Tokenizer tok;
  const auto targets = load_targets(c, model.config(), &tok);
  write_vocab_artifact(run, tok);
  std::vector<NoiseDistribution> kinds;
  for (const auto& k : c.noise.kinds) {
    NoiseDistribution d;
    d.kind = parse_noise_kind(k);
    kinds.push_back(d);
  }
  std::optional<TeacherProvider> teacher;
  if (c.init == "teacher") teacher.emplace(make_teacher(c, model.config().hidden_size));

  const auto outs = run.execute(
      static_cast<int>(targets.size()), [&](int i) { return targets[i].record.id; },
      [&](int i, TaskOutput& o) {
        const auto& t = targets[i];
        t.targets.validate(model.config());
        const std::uint64_t s = derive_seed(run.seed(), {static_cast<std::uint64_t>(i)});
        const auto res = optimize_reconstruction(
            model, t.targets, c.optimizer, c.stopping,
            pair_init(c, teacher ? &*teacher : nullptr, t.record), s);
        for (int k = 0; k < res.iterations_used; ++k)
          o.steps.push_back({{"record", t.record.id},
                             {"step", k + 1},
                             {"ce_loss", res.loss_history[k]},
                             {"token_accuracy", res.accuracy_history[k]}});
        o.pairs.push_back(pair_json(t, res.pair, json::object(), res.converged,
                                    res.iterations_used, res.accuracy_history.back()));
        const auto sweep = noise_sweep(model, res.pair, t.targets, c.noise.alphas, kinds,
                                       c.noise.trials, derive_seed(s, {1}));
        for (const auto& cell : sweep.cells) {
          o.rows.push_back(csv_field(t.record.id) + "," + cell.kind + "," +
                           fmt(cell.alpha) + "," + fmt(cell.mean_accuracy) + "," +
                           fmt(cell.std_accuracy) + "," + std::to_string(cell.trials) +
                           "," + fmt(sweep.baseline_accuracy));
          o.extra.push_back({cell.kind, cell.alpha, cell.mean_accuracy});
        }
      });
  run.write_outputs(outs, "noise.csv",
                    "id,kind,alpha,mean_accuracy,std_accuracy,trials,baseline_accuracy");

  // Figure table: mean over records of each cell's mean accuracy.
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& o : outs)
    for (const auto& e : o.extra)
      cells[{e[0].get<std::string>(), e[1].get<double>()}].push_back(e[2].get<double>());
  auto out = run.open("noise_summary.csv");
  out << "kind,alpha,mean_accuracy,std_accuracy,records\n";
  for (const auto& kind : c.noise.kinds)
    for (double a : c.noise.alphas) {
      const auto it = cells.find({kind, a});
      if (it == cells.end()) continue;
      const auto& v = it->second;
      double mean = 0;
      for (double x : v) mean += x;
      mean /= v.size();
      double var = 0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
      out << kind << ',' << fmt(a) << ',' << fmt(mean) << ',' << fmt(sd) << ','
          << v.size() << '\n';
    }
  return run.finish();
}

RunRecord run_attention(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  preflight(c);
  const ModelWeights model = load_model(c);
  const int layers = model.config().num_layers;
  std::vector<int> which = c.attention.layers;
  if (which.empty())
    for (int l = 0; l < layers; ++l) which.push_back(l);
  for (int l : which)
    if (l >= layers)
      throw ConfigError("attention layer " + std::to_string(l) + " >= num_layers " +
                        std::to_string(layers));

  std::vector<StoredPair> items;
  if (!c.attention.pairs_from.empty()) {
    items = read_pairs(c.attention.pairs_from);
  } else {
    Tokenizer tok;
    for (auto& t : load_targets(c, model.config(), &tok)) items.push_back({t, {}, json()});
    write_vocab_artifact(run, tok);
  }
  std::optional<TeacherProvider> teacher;
  if (c.init == "teacher") teacher.emplace(make_teacher(c, model.config().hidden_size));

  const auto outs = run.execute(
      static_cast<int>(items.size()), [&](int i) { return items[i].target.record.id; },
      [&](int i, TaskOutput& o) {
        const auto& t = items[i].target;
        t.targets.validate(model.config());
        ProtoTokenPair pair = items[i].pair;
        if (pair.e.size() == 0) {
          const auto res = optimize_reconstruction(
              model, t.targets, c.optimizer, c.stopping,
              pair_init(c, teacher ? &*teacher : nullptr, t.record),
              derive_seed(run.seed(), {static_cast<std::uint64_t>(i)}));
          for (int k = 0; k < res.iterations_used; ++k)
            o.steps.push_back({{"record", t.record.id},
                               {"step", k + 1},
                               {"ce_loss", res.loss_history[k]},
                               {"token_accuracy", res.accuracy_history[k]}});
          o.pairs.push_back(pair_json(t, res.pair, json::object(), res.converged,
                                      res.iterations_used, res.accuracy_history.back()));
          pair = res.pair;
        }
        const int len = t.targets.length();
        const ForwardTrace trace = forward(model, assemble_input(pair, len), true);
        const AttentionToE att = attention_to_e(trace);
        const Matrix heat = layer_heatmap(att, which);
        std::ostringstream per_head;
        write_attention_csv(per_head, att);
        std::string line;
        std::istringstream lines(per_head.str());
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) o.rows.push_back(csv_field(t.record.id) + "," + line);
        o.extra = {{"accuracy", token_accuracy(trace, t.targets)},
                   {"heatmap", to_json_rows(heat)}};
      });
  run.write_outputs(outs, "attention.csv", "id,layer,head,query,attention_to_e");

  // Mean heatmap over records at every query position some record reaches.
  int tmax = 0;
  for (const auto& o : outs)
    if (o.status == "ok") tmax = std::max(tmax, static_cast<int>(o.extra["heatmap"][0].size()));
  if (tmax > 0) {
    Matrix sum = Matrix::Zero(static_cast<Eigen::Index>(which.size()), tmax);
    std::vector<int> count(tmax, 0);
    for (const auto& o : outs) {
      if (o.status != "ok") continue;
      const auto& rows = o.extra["heatmap"];
      for (std::size_t l = 0; l < which.size(); ++l)
        for (std::size_t q = 0; q < rows[l].size(); ++q) sum(l, q) += rows[l][q].get<double>();
      for (std::size_t q = 0; q < rows[0].size(); ++q) ++count[q];
    }
    for (int q = 0; q < tmax; ++q) sum.col(q) /= count[q];
    auto out = run.open("attention_mean.csv");
    write_heatmap_csv(out, sum, which);
  }
  return run.finish();
}

RunRecord run_project(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  const auto pairs = read_pairs(c.project.pairs_from);
  std::vector<Vector> rows;
  std::vector<std::string> ids, labels;
  for (const auto& p : pairs) {
    const auto& r = p.target.record;
    std::string label = c.project.label_by == "label"     ? r.label
                        : c.project.label_by == "variant" ? to_string(r.variant)
                                                          : r.source_id;
    const std::string tag = p.run.empty() ? "" : "@" + variant_tag(p.run);
    if (c.project.vectors != "m") {
      rows.push_back(p.pair.e);
      ids.push_back(r.id + tag + (c.project.vectors == "both" ? ":e" : ""));
      labels.push_back(label + (c.project.vectors == "both" ? ":e" : ""));
    }
    if (c.project.vectors != "e") {
      rows.push_back(p.pair.m);
      ids.push_back(r.id + tag + (c.project.vectors == "both" ? ":m" : ""));
      labels.push_back(label + (c.project.vectors == "both" ? ":m" : ""));
    }
  }
  const int n = static_cast<int>(rows.size());
  if (n < 2) throw ValidationError("projection needs at least 2 vectors");
  Matrix points(n, rows[0].size());
  for (int i = 0; i < n; ++i) {
    if (rows[i].size() != points.cols())
      throw ShapeError("stored vectors have different dimensions");
    points.row(i) = rows[i].transpose();
  }
  ProjectionConfig tsne = c.project.tsne;
  tsne.seed = run.seed();
  run.log("t-SNE over " + std::to_string(n) + " vectors");
  const Projection2D proj = tsne_project(points, tsne);
  {
    auto out = run.open("projection.csv");
    write_projection_csv(out, proj, ids, labels);
  }
  {
    auto out = run.open("steps.jsonl");
    for (const auto& [it, kl] : proj.kl_history)
      out << json{{"record", "projection"}, {"step", it}, {"kl", kl}}.dump() << '\n';
  }
  run.add_record({"projection", "ok",
                  proj.degenerate ? "degenerate input: all vectors identical" : ""});
  return run.finish();
}

RunRecord run_datagen(const ExperimentConfig& config, const RunOptions& options) {
  Run run(config, options);
  const auto& c = run.config();
  const auto& d = c.datagen;
  const Lexicon lexicon = load_lexicon(d.lexicon);
  const auto grammars = load_grammars(d.grammars);
  for (const auto& [cls, g] : grammars) g.validate(lexicon);

  GenerateOptions gen;
  gen.max_depth = d.max_depth;
  std::vector<CorpusRecord> corpus =
      generate_corpus(grammars, lexicon, d.per_class, run.seed(), gen);
  const auto originals = corpus;
  run.log("generated " + std::to_string(originals.size()) + " sentences");

  if (d.lexical) {
    AugmentConfig aug = d.augment;
    aug.seed = derive_seed(run.seed(), {0x6c6578});
    // Per-original failures (e.g. no letters) are recorded, not fatal.
    std::vector<TaskOutput> outs = run.execute(
        static_cast<int>(originals.size()), [&](int i) { return originals[i].id; },
        [&](int i, TaskOutput& o) {
          AugmentConfig per = aug;
          per.seed = derive_seed(aug.seed, {static_cast<std::uint64_t>(i)});
          const auto variants = typo_augment(originals[i].text, per, aug.count);
          for (int k = 0; k < aug.count; ++k) {
            json events = json::array();
            for (const auto& ev : variants[k].events)
              events.push_back({{"type", to_string(ev.type)},
                                {"position", ev.position},
                                {"original", ev.original},
                                {"replacement", ev.replacement}});
            o.extra.push_back({{"id", originals[i].id + "/lex#" + std::to_string(k)},
                               {"text", variants[k].text},
                               {"events", events}});
          }
        });
    auto log_out = run.open("augment_events.jsonl");
    for (std::size_t i = 0; i < outs.size(); ++i) {
      run.add_record({outs[i].id, outs[i].status, outs[i].error});
      for (const auto& v : outs[i].extra) {
        CorpusRecord r;
        r.id = v["id"].get<std::string>();
        r.text = v["text"].get<std::string>();
        r.label = originals[i].label;
        r.variant = Variant::kLexical;
        r.source_id = originals[i].id;
        corpus.push_back(std::move(r));
        log_out << v.dump() << '\n';
      }
    }
  } else {
    for (const auto& r : originals) run.add_record({r.id, "ok", ""});
  }

  if (!d.paraphrases.empty()) {
    std::vector<CorpusRecord> sources;
    if (!d.originals.empty()) {
      sources = load_corpus(d.originals);
      corpus.insert(corpus.end(), sources.begin(), sources.end());
    }
    const auto sem =
        load_paraphrases(d.paraphrases, d.originals.empty() ? nullptr : &sources);
    corpus.insert(corpus.end(), sem.begin(), sem.end());
    run.log("ingested " + std::to_string(sem.size()) + " paraphrases");
  }

  {
    auto out = run.open("corpus.jsonl");
    write_corpus_jsonl(out, corpus);
  }
  std::vector<std::string> texts;
  for (const auto& r : corpus) texts.push_back(r.text);
  {
    auto out = run.open("vocabulary.json");
    write_vocabulary(out, Tokenizer::build(texts));
  }
  {
    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& r : corpus) ++counts[r.label][to_string(r.variant)];
    auto out = run.open("corpus_summary.csv");
    out << "label,original,lexical,semantic\n";
    for (const auto& [label, byv] : counts) {
      auto get = [&](const char* k) {
        const auto it = byv.find(k);
        return it == byv.end() ? 0 : it->second;
      };
      out << label << ',' << get("original") << ',' << get("lexical") << ','
          << get("semantic") << '\n';
    }
  }
  return run.finish();
}

RunRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  switch (config.experiment) {
    case Experiment::kReconstruct:
      return run_reconstruct(config, options);
    case Experiment::kAnchor:
      return run_anchor(config, options);
    case Experiment::kRelational:
      return run_relational(config, options);
    case Experiment::kNoise:
      return run_noise(config, options);
    case Experiment::kAttention:
      return run_attention(config, options);
    case Experiment::kProject:
      return run_project(config, options);
    case Experiment::kDatagen:
      return run_datagen(config, options);
  }
  throw ConfigError("unknown experiment");
}

RunRecord read_run_record(const std::string& dir) {
  const std::string path = (fs::path(dir) / "record.json").string();
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open run record '" + path + "'");
  json j;
  try {
    j = json::parse(in);
    RunRecord rec;
    rec.run_id = j.at("run_id").get<std::string>();
    rec.out_dir = dir;
    rec.config = config_from_json(j.at("config"));
    rec.config_hash = j.at("config_hash").get<std::string>();
    if (config_hash(rec.config) != rec.config_hash)
      throw ValidationError("run record '" + path +
                            "': config hash does not match the inline config");
    for (const auto& r : j.at("records"))
      rec.records.push_back({r.at("id").get<std::string>(),
                             r.at("status").get<std::string>(),
                             r.at("error").get<std::string>()});
    rec.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    rec.wall_seconds = j.at("wall_clock_seconds").get<double>();
    return rec;
  } catch (const json::exception& e) {
    throw LoadError("run record '" + path + "': " + e.what());
  }
}

}  // namespace protolab
