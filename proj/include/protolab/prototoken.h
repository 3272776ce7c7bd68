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

#ifndef PROTOLAB_PROTOTOKEN_H_
#define PROTOLAB_PROTOTOKEN_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "protolab/common.h"
#include "protolab/model.h"

namespace protolab {

// Target token ids t_1..t_T.
struct TargetSequence {
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  // Throws ArgumentError unless 1 <= T <= max_positions and all ids are in
  // [0, vocab_size).
  void validate(const ModelConfig& config) const;
};

// The two learnable input vectors: e at position 0, m at positions 1..T-1.
struct ProtoTokenPair {
  Vector e;
  Vector m;

  int dim() const { return static_cast<int>(e.size()); }
};

struct OptimizerConfig {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double weight_decay = 0.01;
  double epsilon = 1e-8;

  void validate() const;
};

struct StoppingCriteria {
  double accuracy_threshold = 0.9;
  int max_iterations = 2000;

  void validate() const;
};

// First and second moment estimates for one parameter vector.
struct AdamState {
  Vector first;
  Vector second;

  explicit AdamState(Eigen::Index n = 0)
      : first(Vector::Zero(n)), second(Vector::Zero(n)) {}
};

// One decoupled-weight-decay Adam update in place. step_index starts at 1.
// Throws NumericError on a non-finite gradient.
void adamw_step(Vector& params, const Vector& grads, AdamState& state,
                const OptimizerConfig& config, long step_index);

// [e, m, ..., m] with T rows.
EmbeddingSequence assemble_input(const ProtoTokenPair& pair, int length);

// Mean next-token cross-entropy: logits row i-1 scores target t_i. When
// dlogits is set it receives dLoss/dLogits.
double cross_entropy(const Matrix& logits, const TargetSequence& targets,
                     Matrix* dlogits = nullptr);
double cross_entropy(const ForwardTrace& trace, const TargetSequence& targets);

// Row-wise argmax; ties go to the lowest id.
std::vector<int> argmax_rows(const Matrix& logits);

double token_accuracy(const Matrix& logits, const TargetSequence& targets);
double token_accuracy(const ForwardTrace& trace, const TargetSequence& targets);

// Cross-entropy against `targets` as a model LossSpec.
LossSpec cross_entropy_loss(const TargetSequence& targets);

// How a fresh pair is drawn.
struct PairInit {
  // Empty: both vectors standard normal. Otherwise e is set to this vector.
  Vector teacher;

  static PairInit standard_normal() { return {}; }
  static PairInit from_teacher(Vector t) { return {std::move(t)}; }
  bool uses_teacher() const { return teacher.size() > 0; }
};

ProtoTokenPair init_pair(int dim, std::uint64_t seed,
                         const PairInit& init = PairInit::standard_normal());

// Splits a T x d input gradient into the gradients of e (row 0) and m (sum of
// rows 1..T-1).
struct PairGradient {
  Vector e;
  Vector m;
};
PairGradient route_gradient(const Matrix& input_gradient);

struct ReconstructionResult {
  ProtoTokenPair pair;
  std::vector<double> loss_history;
  std::vector<double> accuracy_history;
  int iterations_used = 0;
  bool converged = false;
  std::vector<int> decoded;
};

// Optimizes (e, m) for one target sequence. Each iteration evaluates the
// current pair, records loss and accuracy, stops if the accuracy threshold is
// met or the iteration budget is spent, and otherwise takes one AdamW step.
// The returned pair is therefore the one whose metrics were recorded last.
ReconstructionResult optimize_reconstruction(const ModelWeights& model,
                                             const TargetSequence& targets,
                                             const OptimizerConfig& opt,
                                             const StoppingCriteria& stop,
                                             const PairInit& init,
                                             std::uint64_t seed);

// One forward pass over [e, m x (T-1)] and a per-position argmax.
std::vector<int> decode(const ModelWeights& model, const ProtoTokenPair& pair,
                        int length);

// JSON-lines: one {step, ce_loss, token_accuracy} line per step, then a footer
// line {"final": {...}}.
void write_jsonl(std::ostream& out, const ReconstructionResult& result);
ReconstructionResult read_reconstruction_jsonl(std::istream& in);

}  // namespace protolab

#endif  // PROTOLAB_PROTOTOKEN_H_
