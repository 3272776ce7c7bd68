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

#include "protolab/experiment.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "protolab/json_util.h"
#include "protolab/noise.h"

namespace protolab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kExperimentNames[] = {
    "reconstruct", "anchor", "relational", "noise", "attention", "project",
    "datagen"};

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as typos.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& dst) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& dst) {
    T value{};
    if (j_.contains(key)) {
      get(key, value);
      dst = value;
    }
    used_.insert(key);
  }

  void get_path(const char* key, std::string& dst, const std::string& base) {
    get(key, dst);
    if (!dst.empty() && !base.empty() && fs::path(dst).is_relative())
      dst = (fs::path(base) / dst).lexically_normal().string();
  }

  Section sub(const char* key) {
    used_.insert(key);
    const auto it = j_.find(key);
    static const json empty = json::object();
    return Section(it == j_.end() ? empty : *it, where_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key()))
        throw ConfigError("unknown config key " + where_ + "." + it.key());
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) return;
  if (!fs::exists(path))
    throw ConfigError(what + " '" + path + "' does not exist");
}

}  // namespace

std::string to_string(Experiment experiment) {
  return kExperimentNames[static_cast<int>(experiment)];
}

Experiment parse_experiment(const std::string& name) {
  for (int i = 0; i < 7; ++i)
    if (name == kExperimentNames[i]) return static_cast<Experiment>(i);
  throw ConfigError("unknown experiment '" + name + "'");
}

const std::vector<Experiment>& all_experiments() {
  static const std::vector<Experiment> all = {
      Experiment::kReconstruct, Experiment::kAnchor,    Experiment::kRelational,
      Experiment::kNoise,       Experiment::kAttention, Experiment::kProject,
      Experiment::kDatagen};
  return all;
}

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(schema_version));
  if (!seed) throw ConfigError("seed is required");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (init != "normal" && init != "teacher")
    throw ConfigError("init must be 'normal' or 'teacher'");

  if (experiment == Experiment::kDatagen) {
    if (datagen.lexicon.empty() || datagen.grammars.empty())
      throw ConfigError("datagen needs lexicon and grammars");
    require_file(datagen.lexicon, "lexicon");
    require_file(datagen.grammars, "grammar directory");
    require_file(datagen.paraphrases, "paraphrase file");
    require_file(datagen.originals, "originals corpus");
    if (datagen.per_class < 1) throw ConfigError("datagen.per_class must be >= 1");
    if (datagen.max_depth < 1) throw ConfigError("datagen.max_depth must be >= 1");
    datagen.augment.validate();
    return;
  }
  if (experiment == Experiment::kProject) {
    if (project.pairs_from.empty()) throw ConfigError("project needs pairs_from");
    require_file(project.pairs_from, "pairs file");
    if (project.vectors != "e" && project.vectors != "m" && project.vectors != "both")
      throw ConfigError("project.vectors must be e, m or both");
    if (project.label_by != "source_id" && project.label_by != "label" &&
        project.label_by != "variant")
      throw ConfigError("project.label_by must be source_id, label or variant");
    project.tsne.validate();
    return;
  }

  if (model.path.empty())
    model.config.validate();
  else
    require_file(model.path, "model weights");
  optimizer.validate();
  stopping.validate();
  regularizer.validate();
  require_file(corpus.path, "corpus");
  require_file(corpus.vocabulary, "vocabulary");
  if (corpus.limit < 0) throw ConfigError("corpus.limit must be >= 0");
  if (corpus.max_length < 1) throw ConfigError("corpus.max_length must be >= 1");
  if (corpus.path.empty() && (corpus.random_count < 1 || corpus.random_length < 1))
    throw ConfigError("random targets need count and length >= 1");
  for (const auto& v : corpus.variants) {
    if (v != "original" && v != "lexical" && v != "semantic")
      throw ConfigError("unknown corpus variant filter '" + v + "'");
  }
  if (teacher.mode == TeacherMode::kFile) {
    if (teacher.path.empty()) throw ConfigError("file teacher needs a path");
    require_file(teacher.path, "teacher file");
  }

  switch (experiment) {
    case Experiment::kAnchor:
      if (anchor.lambdas.empty()) throw ConfigError("anchor.lambdas is empty");
      for (double l : anchor.lambdas)
        if (!(l >= 0.0)) throw ConfigError("anchor lambdas must be >= 0");
      break;
    case Experiment::kRelational:
      if (relational.shared_m.empty() || relational.lambda_rel.empty())
        throw ConfigError("relational variants are empty");
      for (double l : relational.lambda_rel)
        if (!(l >= 0.0)) throw ConfigError("lambda_rel values must be >= 0");
      if (regularizer.batch_size < 2)
        throw ConfigError("relational runs need batch_size >= 2");
      break;
    case Experiment::kNoise:
      if (noise.kinds.empty() || noise.alphas.empty())
        throw ConfigError("noise grid is empty");
      for (const auto& k : noise.kinds) parse_noise_kind(k);
      for (double a : noise.alphas)
        if (!(a >= 0.0)) throw ConfigError("noise alphas must be >= 0");
      if (noise.trials < 1) throw ConfigError("noise.trials must be >= 1");
      break;
    case Experiment::kAttention:
      require_file(attention.pairs_from, "pairs file");
      for (int l : attention.layers)
        if (l < 0) throw ConfigError("attention layers must be >= 0");
      break;
    default:
      break;
  }
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = to_string(c.experiment);
  if (c.seed) j["seed"] = *c.seed;
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  const auto& mc = c.model.config;
  j["model"] = {
      {"path", c.model.path},
      {"config",
       {{"hidden_size", mc.hidden_size},
        {"num_layers", mc.num_layers},
        {"num_heads", mc.num_heads},
        {"mlp_hidden", mc.mlp_hidden},
        {"vocab_size", mc.vocab_size},
        {"max_positions", mc.max_positions},
        {"norm_epsilon", mc.norm_epsilon},
        {"seed", mc.seed},
        {"positional_on_inputs", mc.positional_on_inputs}}},
      {"init",
       {{"attn_norm_gain", c.model.init.attn_norm_gain},
        {"mlp_norm_gain", c.model.init.mlp_norm_gain},
        {"final_norm_gain", c.model.init.final_norm_gain},
        {"positional_std", c.model.init.positional_std}}}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"weight_decay", c.optimizer.weight_decay},
                    {"epsilon", c.optimizer.epsilon}};
  j["stopping"] = {{"accuracy_threshold", c.stopping.accuracy_threshold},
                   {"max_iterations", c.stopping.max_iterations}};
  j["init"] = c.init;
  j["regularizer"] = {{"lambda_anchor", c.regularizer.lambda_anchor},
                      {"lambda_rel", c.regularizer.lambda_rel},
                      {"rel_kind", to_string(c.regularizer.rel_kind)},
                      {"huber_delta", c.regularizer.huber_delta},
                      {"shared_m", c.regularizer.shared_m},
                      {"batch_size", c.regularizer.batch_size},
                      {"init_from_teacher", c.regularizer.init_from_teacher},
                      {"correlation", to_string(c.regularizer.correlation)}};
  j["teacher"] = {{"mode", to_string(c.teacher.mode)},
                  {"path", c.teacher.path},
                  {"seed", c.teacher.seed},
                  {"projection_seed", c.teacher.projection_seed}};
  j["corpus"] = {{"path", c.corpus.path},
                 {"vocabulary", c.corpus.vocabulary},
                 {"variants", c.corpus.variants},
                 {"limit", c.corpus.limit},
                 {"max_length", c.corpus.max_length},
                 {"random_count", c.corpus.random_count},
                 {"random_length", c.corpus.random_length}};
  j["anchor"] = {{"lambdas", c.anchor.lambdas}};
  j["relational"] = {{"shared_m", c.relational.shared_m},
                     {"lambda_rel", c.relational.lambda_rel}};
  j["noise"] = {{"kinds", c.noise.kinds},
                {"alphas", c.noise.alphas},
                {"trials", c.noise.trials}};
  j["attention"] = {{"layers", c.attention.layers},
                    {"pairs_from", c.attention.pairs_from}};
  const auto& t = c.project.tsne;
  j["project"] = {{"pairs_from", c.project.pairs_from},
                  {"vectors", c.project.vectors},
                  {"label_by", c.project.label_by},
                  {"tsne",
                   {{"perplexity", t.perplexity},
                    {"iterations", t.iterations},
                    {"learning_rate", t.learning_rate},
                    {"momentum", t.momentum},
                    {"final_momentum", t.final_momentum},
                    {"momentum_switch", t.momentum_switch},
                    {"early_exaggeration", t.early_exaggeration},
                    {"exaggeration_iterations", t.exaggeration_iterations},
                    {"init_scale", t.init_scale},
                    {"adaptive_gains", t.adaptive_gains},
                    {"min_gain", t.min_gain},
                    {"checkpoint_every", t.checkpoint_every}}}};
  const auto& a = c.datagen.augment;
  j["datagen"] = {{"lexicon", c.datagen.lexicon},
                  {"grammars", c.datagen.grammars},
                  {"per_class", c.datagen.per_class},
                  {"max_depth", c.datagen.max_depth},
                  {"lexical", c.datagen.lexical},
                  {"paraphrases", c.datagen.paraphrases},
                  {"originals", c.datagen.originals},
                  {"augment",
                   {{"char_mod_probability", a.char_mod_probability},
                    {"min_augs", a.min_augs},
                    {"max_augs", a.max_augs},
                    {"max_repetition", a.max_repetition},
                    {"keyboard_layout", a.keyboard_layout},
                    {"count", a.count}}}};
  return j;
}

ExperimentConfig config_from_json(const json& j, const std::string& base) {
  ExperimentConfig c;
  Section root(j, "config");
  root.get("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
  std::string name = to_string(c.experiment);
  root.get("experiment", name);
  c.experiment = parse_experiment(name);
  root.get_optional("seed", c.seed);
  root.get_path("output_dir", c.output_dir, base);
  root.get("workers", c.workers);
  root.get("init", c.init);

  {
    Section m = root.sub("model");
    m.get_path("path", c.model.path, base);
    Section mc = m.sub("config");
    auto& cfg = c.model.config;
    mc.get("hidden_size", cfg.hidden_size);
    mc.get("num_layers", cfg.num_layers);
    mc.get("num_heads", cfg.num_heads);
    mc.get("mlp_hidden", cfg.mlp_hidden);
    mc.get("vocab_size", cfg.vocab_size);
    mc.get("max_positions", cfg.max_positions);
    mc.get("norm_epsilon", cfg.norm_epsilon);
    mc.get("seed", cfg.seed);
    mc.get("positional_on_inputs", cfg.positional_on_inputs);
    mc.finish();
    Section mi = m.sub("init");
    mi.get("attn_norm_gain", c.model.init.attn_norm_gain);
    mi.get("mlp_norm_gain", c.model.init.mlp_norm_gain);
    mi.get("final_norm_gain", c.model.init.final_norm_gain);
    mi.get("positional_std", c.model.init.positional_std);
    mi.finish();
    m.finish();
  }
  {
    Section o = root.sub("optimizer");
    o.get("learning_rate", c.optimizer.learning_rate);
    o.get("beta1", c.optimizer.beta1);
    o.get("beta2", c.optimizer.beta2);
    o.get("weight_decay", c.optimizer.weight_decay);
    o.get("epsilon", c.optimizer.epsilon);
    o.finish();
  }
  {
    Section s = root.sub("stopping");
    s.get("accuracy_threshold", c.stopping.accuracy_threshold);
    s.get("max_iterations", c.stopping.max_iterations);
    s.finish();
  }
  {
    Section r = root.sub("regularizer");
    auto& reg = c.regularizer;
    r.get("lambda_anchor", reg.lambda_anchor);
    r.get("lambda_rel", reg.lambda_rel);
    std::string kind = to_string(reg.rel_kind);
    r.get("rel_kind", kind);
    std::string corr = to_string(reg.correlation);
    r.get("correlation", corr);
    r.get("huber_delta", reg.huber_delta);
    r.get("shared_m", reg.shared_m);
    r.get("batch_size", reg.batch_size);
    r.get("init_from_teacher", reg.init_from_teacher);
    r.finish();
    try {
      reg.rel_kind = parse_relational_kind(kind);
      reg.correlation = parse_correlation_kind(corr);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  {
    Section t = root.sub("teacher");
    std::string mode = to_string(c.teacher.mode);
    t.get("mode", mode);
    c.teacher.mode = parse_teacher_mode(mode);
    t.get_path("path", c.teacher.path, base);
    t.get("seed", c.teacher.seed);
    t.get("projection_seed", c.teacher.projection_seed);
    t.finish();
  }
  {
    Section s = root.sub("corpus");
    s.get_path("path", c.corpus.path, base);
    s.get_path("vocabulary", c.corpus.vocabulary, base);
    s.get("variants", c.corpus.variants);
    s.get("limit", c.corpus.limit);
    s.get("max_length", c.corpus.max_length);
    s.get("random_count", c.corpus.random_count);
    s.get("random_length", c.corpus.random_length);
    s.finish();
  }
  {
    Section s = root.sub("anchor");
    s.get("lambdas", c.anchor.lambdas);
    s.finish();
  }
  {
    Section s = root.sub("relational");
    s.get("shared_m", c.relational.shared_m);
    s.get("lambda_rel", c.relational.lambda_rel);
    s.finish();
  }
  {
    Section s = root.sub("noise");
    s.get("kinds", c.noise.kinds);
    s.get("alphas", c.noise.alphas);
    s.get("trials", c.noise.trials);
    s.finish();
  }
  {
    Section s = root.sub("attention");
    s.get("layers", c.attention.layers);
    s.get_path("pairs_from", c.attention.pairs_from, base);
    s.finish();
  }
  {
    Section s = root.sub("project");
    s.get_path("pairs_from", c.project.pairs_from, base);
    s.get("vectors", c.project.vectors);
    s.get("label_by", c.project.label_by);
    Section t = s.sub("tsne");
    auto& p = c.project.tsne;
    t.get("perplexity", p.perplexity);
    t.get("iterations", p.iterations);
    t.get("learning_rate", p.learning_rate);
    t.get("momentum", p.momentum);
    t.get("final_momentum", p.final_momentum);
    t.get("momentum_switch", p.momentum_switch);
    t.get("early_exaggeration", p.early_exaggeration);
    t.get("exaggeration_iterations", p.exaggeration_iterations);
    t.get("init_scale", p.init_scale);
    t.get("adaptive_gains", p.adaptive_gains);
    t.get("min_gain", p.min_gain);
    t.get("checkpoint_every", p.checkpoint_every);
    t.finish();
    s.finish();
  }
  {
    Section s = root.sub("datagen");
    auto& d = c.datagen;
    s.get_path("lexicon", d.lexicon, base);
    s.get_path("grammars", d.grammars, base);
    s.get("per_class", d.per_class);
    s.get("max_depth", d.max_depth);
    s.get("lexical", d.lexical);
    s.get_path("paraphrases", d.paraphrases, base);
    s.get_path("originals", d.originals, base);
    Section a = s.sub("augment");
    a.get("char_mod_probability", d.augment.char_mod_probability);
    a.get("min_augs", d.augment.min_augs);
    a.get("max_augs", d.augment.max_augs);
    a.get("max_repetition", d.augment.max_repetition);
    a.get("keyboard_layout", d.augment.keyboard_layout);
    a.get("count", d.augment.count);
    a.finish();
    s.finish();
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  const std::string base =
      fs::absolute(fs::path(path)).parent_path().lexically_normal().string();
  return config_from_json(j, base);
}

void save_config(const std::string& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config '" + path + "'");
  out << config_to_json(config).dump(2) << '\n';
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(config_to_json(config).dump())));
  return buf;
}

}  // namespace protolab
