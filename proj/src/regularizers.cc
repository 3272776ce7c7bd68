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

#include "protolab/regularizers.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "protolab/random.h"

namespace protolab {
namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw ValidationError("correlation undefined: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Ranks starting at 1, ties share their average rank.
std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::string to_string(RelationalKind kind) {
  return kind == RelationalKind::kMse ? "mse" : "huber";
}

RelationalKind parse_relational_kind(const std::string& name) {
  if (name == "mse") return RelationalKind::kMse;
  if (name == "huber") return RelationalKind::kHuber;
  throw ConfigError("unknown relational loss kind '" + name + "'");
}

std::string to_string(CorrelationKind kind) {
  return kind == CorrelationKind::kPearson ? "pearson" : "spearman";
}

CorrelationKind parse_correlation_kind(const std::string& name) {
  if (name == "pearson") return CorrelationKind::kPearson;
  if (name == "spearman") return CorrelationKind::kSpearman;
  throw ConfigError("unknown correlation kind '" + name + "'");
}

void RegularizerConfig::validate() const {
  if (!(lambda_anchor >= 0.0)) throw ConfigError("lambda_anchor must be >= 0");
  if (!(lambda_rel >= 0.0)) throw ConfigError("lambda_rel must be >= 0");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (lambda_rel > 0.0 && batch_size < 2)
    throw ConfigError("relational loss needs batch_size >= 2");
}

SimilarityMatrix::SimilarityMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols() || values_.rows() < 1)
    throw ShapeError("similarity matrix must be square and non-empty");
  const Eigen::Index n = values_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(values_(i, i) - 1.0) > 1e-12)
      throw ValidationError("similarity matrix diagonal must be 1");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(values_(i, j) >= -1.0 && values_(i, j) <= 1.0))
        throw ValidationError("similarity entries must lie in [-1, 1]");
      if (std::abs(values_(i, j) - values_(j, i)) > 1e-12)
        throw ValidationError("similarity matrix must be symmetric");
    }
  }
}

std::vector<double> SimilarityMatrix::off_diagonal() const {
  std::vector<double> out;
  const int n = size();
  out.reserve(static_cast<std::size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) out.push_back(values_(i, j));
  return out;
}

double cosine_similarity(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw ArgumentError("cosine: dimension mismatch " +
                        std::to_string(u.size()) + " vs " +
                        std::to_string(v.size()));
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw ArgumentError("cosine undefined for a zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

Vector cosine_gradient(const Vector& u, const Vector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw ArgumentError("cosine undefined for a zero vector");
  const double c = u.dot(v) / (nu * nv);
  return v / (nu * nv) - c * u / (nu * nu);
}

double anchor_loss(const Vector& e, const TeacherEmbedding& teacher) {
  return 1.0 - cosine_similarity(e, teacher.vector);
}

Vector anchor_loss_gradient(const Vector& e, const TeacherEmbedding& teacher) {
  if (e.size() != teacher.vector.size())
    throw ArgumentError("anchor: dimension mismatch");
  return -cosine_gradient(e, teacher.vector);
}

SimilarityMatrix similarity_matrix(const std::vector<Vector>& vectors) {
  const int n = static_cast<int>(vectors.size());
  if (n < 2) throw ArgumentError("similarity matrix needs at least 2 vectors");
  for (int i = 0; i < n; ++i) {
    if (vectors[i].norm() == 0.0)
      throw ArgumentError("cosine undefined: vector " + std::to_string(i) +
                          " is zero");
  }
  Matrix s(n, n);
  for (int i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      s(i, j) = cosine_similarity(vectors[i], vectors[j]);
      s(j, i) = s(i, j);
    }
  }
  return SimilarityMatrix(std::move(s));
}

double relational_penalty(double diff, RelationalKind kind, double delta) {
  if (kind == RelationalKind::kMse) return diff * diff;
  const double a = std::abs(diff);
  return a <= delta ? 0.5 * diff * diff : delta * (a - 0.5 * delta);
}

double relational_penalty_derivative(double diff, RelationalKind kind,
                                     double delta) {
  if (kind == RelationalKind::kMse) return 2.0 * diff;
  if (std::abs(diff) <= delta) return diff;
  return diff > 0.0 ? delta : -delta;
}

double relational_loss(const SimilarityMatrix& student,
                       const SimilarityMatrix& teacher, RelationalKind kind,
                       double delta) {
  if (student.size() != teacher.size())
    throw ShapeError("relational loss: matrices differ in size");
  const int n = student.size();
  if (n < 2) throw ShapeError("relational loss needs B >= 2");
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        sum += relational_penalty(student(i, j) - teacher(i, j), kind, delta);
  return sum / (static_cast<double>(n) * (n - 1));
}

double relational_loss_with_gradient(const std::vector<Vector>& vectors,
                                     const SimilarityMatrix& teacher,
                                     RelationalKind kind, double delta,
                                     std::vector<Vector>* grads) {
  const SimilarityMatrix student = similarity_matrix(vectors);
  const double value = relational_loss(student, teacher, kind, delta);
  if (grads) {
    const int n = student.size();
    const double norm = 1.0 / (static_cast<double>(n) * (n - 1));
    grads->assign(n, Vector::Zero(vectors[0].size()));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        // S_ij and S_ji both move with e_i.
        const double w =
            2.0 * norm *
            relational_penalty_derivative(student(i, j) - teacher(i, j), kind,
                                          delta);
        (*grads)[i] += w * cosine_gradient(vectors[i], vectors[j]);
      }
  }
  return value;
}

double offdiag_correlation(const SimilarityMatrix& student,
                           const SimilarityMatrix& teacher,
                           CorrelationKind kind) {
  if (student.size() != teacher.size())
    throw ShapeError("correlation: matrices differ in size");
  if (student.size() < 2)
    throw ValidationError("correlation undefined for B < 2");
  const std::vector<double> x = student.off_diagonal();
  const std::vector<double> y = teacher.off_diagonal();
  if (kind == CorrelationKind::kSpearman) return pearson(ranks(x), ranks(y));
  return pearson(x, y);
}

LossBreakdown combined_loss(double ce, double anchor, double rel,
                            const RegularizerConfig& config) {
  LossBreakdown b;
  b.ce = ce;
  b.anchor = anchor;
  b.rel = rel;
  b.lambda_anchor = config.lambda_anchor;
  b.lambda_rel = config.lambda_rel;
  b.total = ce + config.lambda_anchor * anchor + config.lambda_rel * rel;
  return b;
}

std::uint64_t example_seed(std::uint64_t batch_seed, int index) {
  return derive_seed(batch_seed, {0x62617463ULL, static_cast<std::uint64_t>(index)});
}

BatchEvaluation evaluate_batch(const ModelWeights& model,
                               const std::vector<TargetSequence>& targets,
                               const std::vector<TeacherEmbedding>& teachers,
                               const SimilarityMatrix* teacher_matrix,
                               const RegularizerConfig& reg,
                               const std::vector<Vector>& e,
                               const std::vector<Vector>& m) {
  const int B = static_cast<int>(targets.size());
  const bool shared = m.size() == 1;
  if (static_cast<int>(e.size()) != B)
    throw ShapeError("evaluate_batch: one e per example required");
  if (static_cast<int>(m.size()) != (shared ? 1 : B))
    throw ShapeError("evaluate_batch: m count does not match shared_m");
  const bool need_teachers = reg.lambda_anchor > 0.0 || reg.lambda_rel > 0.0;
  if (need_teachers && static_cast<int>(teachers.size()) != B)
    throw ArgumentError("evaluate_batch: one teacher per example required");

  BatchEvaluation out;
  out.ce.resize(B);
  out.accuracies.resize(B);
  out.predicted.resize(B);
  out.grad_e.resize(B);
  out.grad_m.assign(m.size(), Vector::Zero(model.config().hidden_size));

  double ce_sum = 0.0;
  double anchor_sum = 0.0;
  for (int i = 0; i < B; ++i) {
    const Vector& mi = m[shared ? 0 : i];
    const ProtoTokenPair pair{e[i], mi};
    const InputGradient g =
        input_gradients(model, assemble_input(pair, targets[i].length()),
                        cross_entropy_loss(targets[i]));
    out.ce[i] = g.loss;
    out.accuracies[i] = token_accuracy(g.trace, targets[i]);
    out.predicted[i] = argmax_rows(g.trace.logits);
    const PairGradient routed = route_gradient(g.gradient);
    out.grad_e[i] = routed.e;
    out.grad_m[shared ? 0 : i] += routed.m;
    ce_sum += g.loss;
    if (reg.lambda_anchor > 0.0) {
      anchor_sum += anchor_loss(e[i], teachers[i]);
      out.grad_e[i] += reg.lambda_anchor * anchor_loss_gradient(e[i], teachers[i]);
    } else if (static_cast<int>(teachers.size()) == B) {
      anchor_sum += anchor_loss(e[i], teachers[i]);
    }
  }

  double rel = 0.0;
  if (reg.lambda_rel > 0.0) {
    if (!teacher_matrix) throw ArgumentError("relational term needs S_T");
    std::vector<Vector> rel_grads;
    rel = relational_loss_with_gradient(e, *teacher_matrix, reg.rel_kind,
                                        reg.huber_delta, &rel_grads);
    for (int i = 0; i < B; ++i)
      out.grad_e[i] += static_cast<double>(B) * reg.lambda_rel * rel_grads[i];
  } else if (teacher_matrix && B >= 2) {
    rel = relational_loss(similarity_matrix(e), *teacher_matrix, reg.rel_kind,
                          reg.huber_delta);
  }

  out.breakdown = combined_loss(ce_sum / B, anchor_sum / B, rel, reg);
  out.objective = ce_sum + reg.lambda_anchor * anchor_sum +
                  static_cast<double>(B) * reg.lambda_rel * rel;
  return out;
}

ProtoTokenPair BatchResult::pair(int index) const {
  return {e.at(index), m.size() == 1 ? m[0] : m.at(index)};
}

BatchResult optimize_batch(const ModelWeights& model,
                           const std::vector<TargetSequence>& targets,
                           const std::vector<TeacherEmbedding>& teachers,
                           const OptimizerConfig& opt,
                           const StoppingCriteria& stop,
                           const RegularizerConfig& reg, std::uint64_t seed) {
  opt.validate();
  stop.validate();
  reg.validate();
  const int B = static_cast<int>(targets.size());
  if (B < 1) throw ArgumentError("optimize_batch: empty batch");
  if (reg.lambda_rel > 0.0 && B < 2)
    throw ConfigError("relational loss needs a batch of at least 2");
  const bool have_teachers = !teachers.empty();
  if (have_teachers && static_cast<int>(teachers.size()) != B)
    throw ArgumentError("optimize_batch: " + std::to_string(teachers.size()) +
                        " teachers for " + std::to_string(B) + " targets");
  if (!have_teachers &&
      (reg.lambda_anchor > 0.0 || reg.lambda_rel > 0.0 || reg.init_from_teacher))
    throw ArgumentError("optimize_batch: regularizers need teacher embeddings");
  const int d = model.config().hidden_size;
  for (const TargetSequence& t : targets) t.validate(model.config());
  for (const TeacherEmbedding& t : teachers) {
    if (t.vector.size() != d)
      throw ArgumentError("teacher dimension " + std::to_string(t.vector.size()) +
                          " differs from model dimension " + std::to_string(d));
  }

  std::optional<SimilarityMatrix> teacher_matrix;
  if (have_teachers && B >= 2) {
    std::vector<Vector> tv;
    for (const TeacherEmbedding& t : teachers) tv.push_back(t.vector);
    teacher_matrix = similarity_matrix(tv);
  }

  BatchResult result;
  for (int i = 0; i < B; ++i) {
    const PairInit init = reg.init_from_teacher
                              ? PairInit::from_teacher(teachers[i].vector)
                              : PairInit::standard_normal();
    const ProtoTokenPair p = init_pair(d, example_seed(seed, i), init);
    result.e.push_back(p.e);
    if (!reg.shared_m || i == 0) result.m.push_back(p.m);
  }
  std::vector<AdamState> e_state(B, AdamState(d));
  std::vector<AdamState> m_state(result.m.size(), AdamState(d));

  std::vector<double> correlations;
  for (int step = 1; step <= stop.max_iterations; ++step) {
    BatchEvaluation ev;
    try {
      ev = evaluate_batch(model, targets, teachers,
                          teacher_matrix ? &*teacher_matrix : nullptr, reg,
                          result.e, result.m);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (optimization step " +
                             std::to_string(step) + ")",
                         step);
    }
    BatchStepRecord rec;
    rec.step = step;
    rec.accuracies = ev.accuracies;
    rec.mean_accuracy =
        std::accumulate(ev.accuracies.begin(), ev.accuracies.end(), 0.0) / B;
    rec.losses = ev.breakdown;
    if (have_teachers) {
      for (int i = 0; i < B; ++i)
        rec.cos_to_teacher.push_back(
            cosine_similarity(result.e[i], teachers[i].vector));
    }
    if (teacher_matrix && B >= 3) {
      try {
        rec.offdiag_correlation = offdiag_correlation(
            similarity_matrix(result.e), *teacher_matrix, reg.correlation);
        correlations.push_back(*rec.offdiag_correlation);
      } catch (const ValidationError&) {
        // Left empty: correlation is undefined this step.
      }
    }
    result.steps.push_back(std::move(rec));
    result.iterations_used = step;
    result.decoded = ev.predicted;
    if (result.steps.back().mean_accuracy >= stop.accuracy_threshold) {
      result.converged = true;
      break;
    }
    if (step == stop.max_iterations) break;
    for (int i = 0; i < B; ++i)
      adamw_step(result.e[i], ev.grad_e[i], e_state[i], opt, step);
    for (std::size_t k = 0; k < result.m.size(); ++k)
      adamw_step(result.m[k], ev.grad_m[k], m_state[k], opt, step);
  }
  result.final_correlation = result.steps.back().offdiag_correlation;
  if (!correlations.empty())
    result.mean_step_correlation =
        std::accumulate(correlations.begin(), correlations.end(), 0.0) /
        static_cast<double>(correlations.size());
  return result;
}

nlohmann::json step_json(const BatchStepRecord& r) {
  nlohmann::json line = {{"step", r.step},
                         {"mean_accuracy", r.mean_accuracy},
                         {"accuracies", r.accuracies},
                         {"ce", r.losses.ce},
                         {"anchor", r.losses.anchor},
                         {"rel", r.losses.rel},
                         {"total", r.losses.total},
                         {"cos_to_teacher", r.cos_to_teacher}};
  line["offdiag_correlation"] = r.offdiag_correlation
                                    ? nlohmann::json(*r.offdiag_correlation)
                                    : nlohmann::json(nullptr);
  return line;
}

void write_jsonl(std::ostream& out, const BatchResult& result) {
  for (const BatchStepRecord& r : result.steps) out << step_json(r).dump() << "\n";
}

}  // namespace protolab
