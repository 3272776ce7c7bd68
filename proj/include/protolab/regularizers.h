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

#ifndef PROTOLAB_REGULARIZERS_H_
#define PROTOLAB_REGULARIZERS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "protolab/common.h"
#include "protolab/model.h"
#include "protolab/prototoken.h"

namespace protolab {

enum class RelationalKind { kMse, kHuber };
enum class CorrelationKind { kPearson, kSpearman };

std::string to_string(RelationalKind kind);
RelationalKind parse_relational_kind(const std::string& name);
std::string to_string(CorrelationKind kind);
CorrelationKind parse_correlation_kind(const std::string& name);

struct RegularizerConfig {
  double lambda_anchor = 0.0;
  double lambda_rel = 0.0;
  RelationalKind rel_kind = RelationalKind::kMse;
  double huber_delta = 1.0;
  bool shared_m = false;
  int batch_size = 6;
  // Start each e at its teacher vector instead of a standard normal draw.
  bool init_from_teacher = false;
  CorrelationKind correlation = CorrelationKind::kPearson;

  void validate() const;
};

// A teacher sentence vector at model dimension.
struct TeacherEmbedding {
  Vector vector;
  std::string source;
};

// Pairwise cosine similarities over a batch. Symmetric with unit diagonal.
class SimilarityMatrix {
 public:
  // Validates symmetry and the unit diagonal to 1e-12 and the [-1, 1] range.
  explicit SimilarityMatrix(Matrix values);

  int size() const { return static_cast<int>(values_.rows()); }
  double operator()(int i, int j) const { return values_(i, j); }
  const Matrix& values() const { return values_; }

  // Entries with i != j in row-major order.
  std::vector<double> off_diagonal() const;

 private:
  Matrix values_;
};

// u.v / (|u||v|) clamped to [-1, 1]. Throws ArgumentError when either vector
// is zero or the dimensions differ.
double cosine_similarity(const Vector& u, const Vector& v);
// d cos(u, v) / du.
Vector cosine_gradient(const Vector& u, const Vector& v);

// 1 - cos(e, t), in [0, 2].
double anchor_loss(const Vector& e, const TeacherEmbedding& teacher);
Vector anchor_loss_gradient(const Vector& e, const TeacherEmbedding& teacher);

SimilarityMatrix similarity_matrix(const std::vector<Vector>& vectors);

// Elementwise penalty on a similarity difference and its derivative.
double relational_penalty(double diff, RelationalKind kind, double delta);
double relational_penalty_derivative(double diff, RelationalKind kind,
                                     double delta);

// Mean penalty over the B(B-1) off-diagonal entries.
double relational_loss(const SimilarityMatrix& student,
                       const SimilarityMatrix& teacher, RelationalKind kind,
                       double delta = 1.0);

// relational_loss over the student matrix built from `vectors`, plus the
// gradient with respect to each vector when `grads` is set.
double relational_loss_with_gradient(const std::vector<Vector>& vectors,
                                     const SimilarityMatrix& teacher,
                                     RelationalKind kind, double delta,
                                     std::vector<Vector>* grads);

// Correlation between the off-diagonal entries of two same-size matrices.
// Throws ValidationError when either side has zero variance.
double offdiag_correlation(const SimilarityMatrix& student,
                           const SimilarityMatrix& teacher,
                           CorrelationKind kind = CorrelationKind::kPearson);

struct LossBreakdown {
  double ce = 0.0;
  double anchor = 0.0;
  double rel = 0.0;
  double total = 0.0;
  double lambda_anchor = 0.0;
  double lambda_rel = 0.0;
};

// total = ce + lambda_anchor * anchor + lambda_rel * rel.
LossBreakdown combined_loss(double ce, double anchor, double rel,
                            const RegularizerConfig& config);

// Seed used for example `index` of a batch; a standalone
// optimize_reconstruction with this seed starts from the same pair.
std::uint64_t example_seed(std::uint64_t batch_seed, int index);

// Value and gradients of the batch objective at one point.
//
// The optimized scalar is
//   sum_i CE_i + lambda_anchor * sum_i anchor_i + B * lambda_rel * rel,
// which is B times the breakdown total over batch means. Summing rather than
// averaging keeps each example's gradient identical to a standalone run when
// both lambdas are zero.
struct BatchEvaluation {
  double objective = 0.0;
  LossBreakdown breakdown;  // batch-mean ce and anchor
  std::vector<double> ce;
  std::vector<double> accuracies;
  std::vector<std::vector<int>> predicted;
  std::vector<Vector> grad_e;
  // One entry when m is shared, otherwise one per example.
  std::vector<Vector> grad_m;
};

BatchEvaluation evaluate_batch(const ModelWeights& model,
                               const std::vector<TargetSequence>& targets,
                               const std::vector<TeacherEmbedding>& teachers,
                               const SimilarityMatrix* teacher_matrix,
                               const RegularizerConfig& reg,
                               const std::vector<Vector>& e,
                               const std::vector<Vector>& m);

struct BatchStepRecord {
  int step = 0;
  double mean_accuracy = 0.0;
  std::vector<double> accuracies;
  LossBreakdown losses;
  std::optional<double> offdiag_correlation;
  std::vector<double> cos_to_teacher;
};

struct BatchResult {
  std::vector<Vector> e;
  std::vector<Vector> m;  // size 1 when shared
  std::vector<BatchStepRecord> steps;
  int iterations_used = 0;
  bool converged = false;
  std::vector<std::vector<int>> decoded;
  // Correlation at the last step, and the mean over steps where it was
  // defined.
  std::optional<double> final_correlation;
  std::optional<double> mean_step_correlation;

  ProtoTokenPair pair(int index) const;
  const BatchStepRecord& last() const { return steps.back(); }
};

// Joint optimization of a batch of proto-token pairs. Stops when the mean
// token accuracy reaches the threshold or the iteration budget is spent;
// iteration order matches optimize_reconstruction.
BatchResult optimize_batch(const ModelWeights& model,
                           const std::vector<TargetSequence>& targets,
                           const std::vector<TeacherEmbedding>& teachers,
                           const OptimizerConfig& opt,
                           const StoppingCriteria& stop,
                           const RegularizerConfig& reg, std::uint64_t seed);

// One step as {step, mean_accuracy, accuracies, ce, anchor, rel, total,
// cos_to_teacher, offdiag_correlation}.
nlohmann::json step_json(const BatchStepRecord& record);

// JSON-lines: one {step, mean_accuracy, ce, anchor, rel, offdiag_correlation,
// cos_to_teacher} line per step.
void write_jsonl(std::ostream& out, const BatchResult& result);

}  // namespace protolab

#endif  // PROTOLAB_REGULARIZERS_H_
