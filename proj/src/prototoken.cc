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

#include "protolab/prototoken.h"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "protolab/json_util.h"
#include "protolab/random.h"

namespace protolab {

void TargetSequence::validate(const ModelConfig& config) const {
  if (tokens.empty())
    throw ArgumentError("target sequence must contain at least one token");
  if (length() > config.max_positions) {
    throw ArgumentError("target length " + std::to_string(length()) +
                        " exceeds max_positions " +
                        std::to_string(config.max_positions));
  }
  for (int t : tokens) {
    if (t < 0 || t >= config.vocab_size)
      throw ArgumentError("target token id " + std::to_string(t) +
                          " outside [0, " + std::to_string(config.vocab_size) +
                          ")");
  }
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
}

void StoppingCriteria::validate() const {
  if (!(accuracy_threshold >= 0.0 && accuracy_threshold <= 1.0))
    throw ConfigError("accuracy_threshold must be in [0, 1]");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

void adamw_step(Vector& params, const Vector& grads, AdamState& state,
                const OptimizerConfig& config, long step_index) {
  if (params.size() != grads.size() || state.first.size() != params.size() ||
      state.second.size() != params.size())
    throw ShapeError("adamw_step: parameter, gradient and state sizes differ");
  if (step_index < 1) throw ArgumentError("adamw_step: step_index must be >= 1");
  if (!grads.allFinite())
    throw NumericError("non-finite gradient at optimizer step " +
                           std::to_string(step_index),
                       static_cast<int>(step_index));

  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_index));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_index));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.first[i] = b1 * state.first[i] + (1.0 - b1) * g;
    state.second[i] = b2 * state.second[i] + (1.0 - b2) * g * g;
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    const double theta = params[i];
    params[i] = theta -
                config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon) -
                config.learning_rate * config.weight_decay * theta;
  }
}

EmbeddingSequence assemble_input(const ProtoTokenPair& pair, int length) {
  if (length < 1) throw ArgumentError("assemble_input: T must be >= 1");
  if (pair.e.size() != pair.m.size() || pair.e.size() == 0)
    throw ShapeError("assemble_input: e and m must share a nonzero dimension");
  Matrix rows(length, pair.e.size());
  rows.row(0) = pair.e.transpose();
  for (int t = 1; t < length; ++t) rows.row(t) = pair.m.transpose();
  return EmbeddingSequence(std::move(rows));
}

double cross_entropy(const Matrix& logits, const TargetSequence& targets,
                     Matrix* dlogits) {
  const int T = targets.length();
  if (logits.rows() != T) {
    throw ShapeError("cross_entropy: " + std::to_string(logits.rows()) +
                     " logit rows for " + std::to_string(T) + " targets");
  }
  if (T == 0) throw ShapeError("cross_entropy: empty target sequence");
  const Eigen::Index V = logits.cols();
  if (dlogits) dlogits->setZero(T, V);
  double total = 0.0;
  for (int i = 0; i < T; ++i) {
    const int target = targets.tokens[i];
    if (target < 0 || target >= V)
      throw ArgumentError("cross_entropy: target id out of range");
    const double mx = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd shifted = logits.row(i).array() - mx;
    const double log_z = std::log(shifted.array().exp().sum());
    total += log_z - shifted[target];
    if (dlogits) {
      dlogits->row(i) = (shifted.array() - log_z).exp().matrix() / T;
      (*dlogits)(i, target) -= 1.0 / T;
    }
  }
  return total / T;
}

double cross_entropy(const ForwardTrace& trace, const TargetSequence& targets) {
  return cross_entropy(trace.logits, targets);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

double token_accuracy(const Matrix& logits, const TargetSequence& targets) {
  const int T = targets.length();
  if (logits.rows() != T || T == 0)
    throw ShapeError("token_accuracy: logits and targets lengths differ");
  const std::vector<int> predicted = argmax_rows(logits);
  int correct = 0;
  for (int i = 0; i < T; ++i) correct += predicted[i] == targets.tokens[i];
  return static_cast<double>(correct) / T;
}

double token_accuracy(const ForwardTrace& trace, const TargetSequence& targets) {
  return token_accuracy(trace.logits, targets);
}

LossSpec cross_entropy_loss(const TargetSequence& targets) {
  LossSpec spec;
  spec.logits_term = [targets](const Matrix& logits, Matrix* dlogits) {
    return cross_entropy(logits, targets, dlogits);
  };
  return spec;
}

ProtoTokenPair init_pair(int dim, std::uint64_t seed, const PairInit& init) {
  if (dim < 1) throw ArgumentError("init_pair: dimension must be >= 1");
  if (init.uses_teacher() && init.teacher.size() != dim) {
    throw ArgumentError("init_pair: teacher dimension " +
                        std::to_string(init.teacher.size()) +
                        " differs from model dimension " + std::to_string(dim));
  }
  Rng rng(seed);
  ProtoTokenPair pair;
  pair.e = rng.normal_vector(dim);
  pair.m = rng.normal_vector(dim);
  if (init.uses_teacher()) pair.e = init.teacher;
  return pair;
}

PairGradient route_gradient(const Matrix& input_gradient) {
  PairGradient g;
  g.e = input_gradient.row(0).transpose();
  g.m = Vector::Zero(input_gradient.cols());
  for (Eigen::Index t = 1; t < input_gradient.rows(); ++t)
    g.m += input_gradient.row(t).transpose();
  return g;
}

ReconstructionResult optimize_reconstruction(const ModelWeights& model,
                                             const TargetSequence& targets,
                                             const OptimizerConfig& opt,
                                             const StoppingCriteria& stop,
                                             const PairInit& init,
                                             std::uint64_t seed) {
  opt.validate();
  stop.validate();
  targets.validate(model.config());
  const int T = targets.length();
  const int d = model.config().hidden_size;

  ReconstructionResult result;
  result.pair = init_pair(d, seed, init);
  AdamState e_state(d);
  AdamState m_state(d);
  const LossSpec loss = cross_entropy_loss(targets);

  for (int step = 1; step <= stop.max_iterations; ++step) {
    InputGradient grad;
    try {
      grad = input_gradients(model, assemble_input(result.pair, T), loss);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (optimization step " +
                             std::to_string(step) + ")",
                         step);
    }
    const double accuracy = token_accuracy(grad.trace, targets);
    result.loss_history.push_back(grad.loss);
    result.accuracy_history.push_back(accuracy);
    result.iterations_used = step;
    result.decoded = argmax_rows(grad.trace.logits);
    if (accuracy >= stop.accuracy_threshold) {
      result.converged = true;
      break;
    }
    if (step == stop.max_iterations) break;
    const PairGradient routed = route_gradient(grad.gradient);
    adamw_step(result.pair.e, routed.e, e_state, opt, step);
    adamw_step(result.pair.m, routed.m, m_state, opt, step);
  }
  return result;
}

std::vector<int> decode(const ModelWeights& model, const ProtoTokenPair& pair,
                        int length) {
  return argmax_rows(forward(model, assemble_input(pair, length), false).logits);
}

void write_jsonl(std::ostream& out, const ReconstructionResult& result) {
  for (int i = 0; i < result.iterations_used; ++i) {
    nlohmann::json line = {{"step", i + 1},
                           {"ce_loss", result.loss_history[i]},
                           {"token_accuracy", result.accuracy_history[i]}};
    out << line.dump() << "\n";
  }
  nlohmann::json footer;
  footer["final"] = {{"e", to_json_array(result.pair.e)},
                     {"m", to_json_array(result.pair.m)},
                     {"iterations_used", result.iterations_used},
                     {"converged", result.converged},
                     {"decoded", result.decoded}};
  out << footer.dump() << "\n";
}

ReconstructionResult read_reconstruction_jsonl(std::istream& in) {
  ReconstructionResult result;
  std::string line;
  bool have_footer = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("final")) {
      const auto& f = j.at("final");
      result.pair.e = vector_from_json(f.at("e"));
      result.pair.m = vector_from_json(f.at("m"));
      result.iterations_used = f.at("iterations_used").get<int>();
      result.converged = f.at("converged").get<bool>();
      result.decoded = f.at("decoded").get<std::vector<int>>();
      have_footer = true;
      continue;
    }
    const int step = j.at("step").get<int>();
    if (step != static_cast<int>(result.loss_history.size()) + 1)
      throw ValidationError("reconstruction record steps are not consecutive");
    result.loss_history.push_back(j.at("ce_loss").get<double>());
    result.accuracy_history.push_back(j.at("token_accuracy").get<double>());
  }
  if (!have_footer) throw ValidationError("reconstruction record has no footer");
  if (static_cast<int>(result.loss_history.size()) != result.iterations_used)
    throw ValidationError("reconstruction record step count mismatch");
  return result;
}

}  // namespace protolab
