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

// protolab: command-line front end for the experiment runner.
//
//   protolab <experiment> [--config PATH] [--out DIR] [--seed N]
//            [--workers N] [--force]
//
// Flags override the matching config fields. Exit codes: 0 success (per-record
// failures are reported but do not fail the run), 1 runtime error, 2 usage or
// config error, 3 output directory collision.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "protolab/experiment.h"
#include "protolab/runner.h"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool force = false;
  bool quiet = false;
};

const char* describe(protolab::Experiment e) {
  using protolab::Experiment;
  switch (e) {
    case Experiment::kReconstruct:
      return "Optimize a proto-token pair per target sequence";
    case Experiment::kAnchor:
      return "Reconstruction with the teacher anchor loss over a lambda grid";
    case Experiment::kRelational:
      return "Batched runs with relational distillation, shared or per-example m";
    case Experiment::kNoise:
      return "Reconstruct, then sweep noise added to e";
    case Experiment::kAttention:
      return "Export attention-to-e tables for optimized pairs";
    case Experiment::kProject:
      return "t-SNE of stored e / m vectors";
    case Experiment::kDatagen:
      return "Generate the CFG corpus with typo and paraphrase variants";
  }
  return "";
}

int run(protolab::Experiment experiment, const Flags& flags) {
  using namespace protolab;
  ExperimentConfig config;
  if (!flags.config.empty()) {
    config = load_config(flags.config);
    if (config.experiment != experiment)
      throw ConfigError("config '" + flags.config + "' is for experiment '" +
                        to_string(config.experiment) + "', not '" +
                        to_string(experiment) + "'");
  }
  config.experiment = experiment;
  if (!flags.out.empty()) config.output_dir = flags.out;
  if (flags.seed) config.seed = flags.seed;
  if (flags.workers) config.workers = *flags.workers;

  RunOptions options;
  options.force = flags.force;
  options.log = flags.quiet ? nullptr : &std::cerr;
  const RunRecord record = run_experiment(config, options);
  std::cout << record.run_id << ' ' << record.out_dir << '\n';
  if (const int failed = record.failures(); failed > 0)
    std::cerr << "warning: " << failed << " of " << record.records.size()
              << " records failed; see record.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proto-token reconstruction laboratory"};
  app.require_subcommand(1);
  Flags flags;
  std::optional<protolab::Experiment> chosen;

  for (const auto e : protolab::all_experiments()) {
    CLI::App* sub = app.add_subcommand(protolab::to_string(e), describe(e));
    sub->add_option("--config", flags.config, "Experiment config (JSON)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Global seed");
    sub->add_option("--workers", flags.workers, "Worker threads")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--force", flags.force, "Empty an existing output directory");
    sub->add_flag("-q,--quiet", flags.quiet, "No progress output");
    sub->callback([&chosen, e] { chosen = e; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(*chosen, flags);
  } catch (const protolab::OutputExistsError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const protolab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
