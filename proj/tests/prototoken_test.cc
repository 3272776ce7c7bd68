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
#include <sstream>
#include <vector>

#include "gtest/gtest.h"
#include "protolab/random.h"

namespace protolab {
namespace {

ModelConfig TinyConfig(std::uint64_t seed = 1) {
  ModelConfig c;
  c.hidden_size = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.mlp_hidden = 16;
  c.vocab_size = 16;
  c.max_positions = 8;
  c.seed = seed;
  return c;
}

Matrix RandomRows(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Logits with +30 on the given id of each row.
Matrix Saturated(const std::vector<int>& ids, int vocab) {
  Matrix z = Matrix::Zero(static_cast<int>(ids.size()), vocab);
  for (std::size_t i = 0; i < ids.size(); ++i) z(i, ids[i]) = 30.0;
  return z;
}

TEST(AssembleInputTest, SingleRow) {
  const ProtoTokenPair p{Vector::Constant(4, 1.0), Vector::Constant(4, 2.0)};
  const EmbeddingSequence s = assemble_input(p, 1);
  ASSERT_EQ(s.length(), 1);
  EXPECT_EQ(Vector(s.rows().row(0).transpose()), p.e);
}

TEST(AssembleInputTest, RepeatsM) {
  Rng rng(3);
  const ProtoTokenPair p{rng.normal_vector(5, 1.0), rng.normal_vector(5, 1.0)};
  const EmbeddingSequence s = assemble_input(p, 4);
  ASSERT_EQ(s.length(), 4);
  EXPECT_EQ(Vector(s.rows().row(0).transpose()), p.e);
  for (int i = 1; i < 4; ++i) {
    EXPECT_EQ(Vector(s.rows().row(i).transpose()), p.m);
    EXPECT_EQ(s.rows().row(i), s.rows().row(1));
  }
}

TEST(AssembleInputTest, RejectsZeroLength) {
  const ProtoTokenPair p{Vector::Ones(3), Vector::Ones(3)};
  EXPECT_THROW(assemble_input(p, 0), ArgumentError);
}

TEST(CrossEntropyTest, UniformLogits) {
  const TargetSequence t{{1, 5, 9, 0, 15}};
  const Matrix z = Matrix::Zero(5, 16);
  EXPECT_NEAR(cross_entropy(z, t), std::log(16.0), 1e-12);
  EXPECT_NEAR(cross_entropy(z, t), 2.7726, 1e-4);
}

TEST(CrossEntropyTest, SaturatedIsNearZero) {
  const TargetSequence t{{3, 1, 4, 1}};
  const double loss = cross_entropy(Saturated(t.tokens, 16), t);
  EXPECT_GE(loss, 0.0);
  EXPECT_LT(loss, 1e-9);
}

TEST(CrossEntropyTest, MatchesNaiveLogLoss) {
  const TargetSequence t{{2, 7, 0}};
  const Matrix z = RandomRows(3, 8, 11);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    double denom = 0.0;
    for (int k = 0; k < 8; ++k) denom += std::exp(z(i, k));
    expected -= std::log(std::exp(z(i, t.tokens[i])) / denom);
  }
  expected /= 3.0;
  EXPECT_NEAR(cross_entropy(z, t), expected, 1e-12);
}

TEST(CrossEntropyTest, LengthMismatch) {
  const TargetSequence t{{1, 2}};
  EXPECT_THROW(cross_entropy(Matrix::Zero(3, 4), t), ShapeError);
  EXPECT_THROW(token_accuracy(Matrix::Zero(3, 4), t), ShapeError);
}

TEST(CrossEntropyTest, NeverNegative) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const Matrix z = RandomRows(4, 6, s) * 20.0;
    TargetSequence t;
    for (int i = 0; i < 4; ++i) t.tokens.push_back(static_cast<int>(rng.below(6)));
    EXPECT_GE(cross_entropy(z, t), 0.0);
  }
}

TEST(CrossEntropyTest, LogitGradientMatchesDifferences) {
  const TargetSequence t{{2, 7, 0}};
  const Matrix z = RandomRows(3, 8, 5);
  Matrix g;
  cross_entropy(z, t, &g);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 8; ++k) {
      Matrix up = z, down = z;
      up(i, k) += h;
      down(i, k) -= h;
      EXPECT_NEAR(g(i, k),
                  (cross_entropy(up, t) - cross_entropy(down, t)) / (2 * h),
                  1e-8);
    }
}

TEST(TokenAccuracyTest, AllCorrect) {
  const TargetSequence t{{3, 1, 4, 1}};
  EXPECT_EQ(token_accuracy(Saturated(t.tokens, 16), t), 1.0);
}

TEST(TokenAccuracyTest, AllWrong) {
  const TargetSequence t{{3, 1, 4, 15}};
  std::vector<int> shifted;
  for (int id : t.tokens) shifted.push_back((id + 1) % 16);
  EXPECT_EQ(token_accuracy(Saturated(shifted, 16), t), 0.0);
}

TEST(TokenAccuracyTest, ThreeOfFour) {
  const TargetSequence t{{3, 1, 4, 1}};
  EXPECT_EQ(token_accuracy(Saturated({3, 1, 4, 2}, 16), t), 0.75);
}

TEST(TokenAccuracyTest, TiesGoToLowestId) {
  Matrix z = Matrix::Zero(1, 5);
  z(0, 2) = 1.0;
  z(0, 4) = 1.0;
  EXPECT_EQ(argmax_rows(z), std::vector<int>{2});
  EXPECT_EQ(argmax_rows(Matrix::Zero(2, 5)), (std::vector<int>{0, 0}));
}

TEST(TokenAccuracyTest, StrictTargetMaxGivesFullAccuracy) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix z = RandomRows(5, 7, 100 + trial);
    TargetSequence t;
    for (int i = 0; i < 5; ++i) {
      const int id = static_cast<int>(rng.below(7));
      t.tokens.push_back(id);
      z(i, id) = z.row(i).maxCoeff() + 1e-3;
    }
    EXPECT_EQ(token_accuracy(z, t), 1.0);
  }
}

TEST(InitPairTest, DeterministicBySeed) {
  const ProtoTokenPair a = init_pair(16, 42);
  const ProtoTokenPair b = init_pair(16, 42);
  const ProtoTokenPair c = init_pair(16, 43);
  EXPECT_EQ(a.e, b.e);
  EXPECT_EQ(a.m, b.m);
  EXPECT_NE(a.e, c.e);
}

TEST(InitPairTest, FromTeacherCopiesExactly) {
  Rng rng(8);
  const Vector t = rng.normal_vector(16, 0.37);
  const ProtoTokenPair p = init_pair(16, 5, PairInit::from_teacher(t));
  EXPECT_EQ(p.e, t);
  EXPECT_EQ(p.m, init_pair(16, 5).m);
}

TEST(InitPairTest, TeacherDimensionMismatch) {
  EXPECT_THROW(init_pair(16, 5, PairInit::from_teacher(Vector::Ones(8))),
               ArgumentError);
}

TEST(InitPairTest, StandardNormalMoments) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProtoTokenPair p = init_pair(10000, seed);
    for (const Vector* v : {&p.e, &p.m}) {
      const double mean = v->mean();
      const double var = (v->array() - mean).square().sum() / (v->size() - 1);
      EXPECT_NEAR(mean, 0.0, 0.05);
      EXPECT_GE(var, 0.9);
      EXPECT_LE(var, 1.1);
    }
  }
}

TEST(AdamWTest, NullStep) {
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  Vector theta(3);
  theta << 1.0, -2.0, 0.5;
  const Vector before = theta;
  AdamState state(3);
  adamw_step(theta, Vector::Zero(3), state, cfg, 1);
  EXPECT_EQ(theta, before);
}

TEST(AdamWTest, HandComputedFirstStep) {
  OptimizerConfig cfg;
  Vector theta = Vector::Ones(1);
  AdamState state(1);
  adamw_step(theta, Vector::Ones(1), state, cfg, 1);
  const double expected = 1.0 - 0.01 * (1.0 / (1.0 + 1e-8)) - 0.01 * 0.01 * 1.0;
  EXPECT_NEAR(theta[0], expected, 1e-15);
  EXPECT_NEAR(theta[0], 0.9899, 1e-4);
}

TEST(AdamWTest, PureDecay) {
  OptimizerConfig cfg;
  cfg.weight_decay = 0.3;
  Vector theta(2);
  theta << 4.0, -1.5;
  const Vector before = theta;
  AdamState state(2);
  adamw_step(theta, Vector::Zero(2), state, cfg, 1);
  for (int i = 0; i < 2; ++i)
    EXPECT_DOUBLE_EQ(theta[i], before[i] * (1.0 - 0.01 * 0.3));
}

TEST(AdamWTest, NonFiniteGradient) {
  OptimizerConfig cfg;
  Vector theta = Vector::Ones(2);
  AdamState state(2);
  Vector g(2);
  g << 1.0, std::nan("");
  EXPECT_THROW(adamw_step(theta, g, state, cfg, 1), NumericError);
}

TEST(OptimizerConfigTest, Defaults) {
  const OptimizerConfig opt;
  EXPECT_EQ(opt.learning_rate, 0.01);
  EXPECT_EQ(opt.beta1, 0.9);
  EXPECT_EQ(opt.beta2, 0.9);
  EXPECT_EQ(opt.weight_decay, 0.01);
  EXPECT_EQ(opt.epsilon, 1e-8);
  const StoppingCriteria stop;
  EXPECT_EQ(stop.accuracy_threshold, 0.9);
  EXPECT_EQ(stop.max_iterations, 2000);
}

TEST(OptimizerConfigTest, Validation) {
  OptimizerConfig opt;
  opt.beta1 = 1.0;
  EXPECT_THROW(opt.validate(), ConfigError);
  opt = {};
  opt.learning_rate = 0.0;
  EXPECT_THROW(opt.validate(), ConfigError);
  StoppingCriteria stop;
  stop.accuracy_threshold = 1.5;
  EXPECT_THROW(stop.validate(), ConfigError);
}

TEST(OptimizeReconstructionTest, IterationBudget) {
  const ModelWeights w = init_random_weights(TinyConfig());
  const TargetSequence t{{1, 2, 3}};
  StoppingCriteria stop;
  stop.max_iterations = 0;
  EXPECT_THROW(optimize_reconstruction(w, t, {}, stop, {}, 1), ConfigError);
  stop.max_iterations = 1;
  stop.accuracy_threshold = 1.0;
  const ReconstructionResult r = optimize_reconstruction(w, t, {}, stop, {}, 1);
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.accuracy_history.size(), 1u);
}

TEST(OptimizeReconstructionTest, RejectsInvalidTargets) {
  const ModelWeights w = init_random_weights(TinyConfig());
  EXPECT_THROW(optimize_reconstruction(w, TargetSequence{{16}}, {}, {}, {}, 1),
               ArgumentError);
  EXPECT_THROW(optimize_reconstruction(w, TargetSequence{}, {}, {}, {}, 1),
               ArgumentError);
}

TEST(OptimizeReconstructionTest, SingleTokenConverges) {
  int converged = 0;
  // Adam moves each coordinate by about lr per step, so at lr 0.01 a unit
  // change in e takes on the order of a hundred steps.
  StoppingCriteria stop;
  stop.max_iterations = 300;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelWeights w = init_random_weights(TinyConfig(seed + 1));
    Rng rng(seed);
    const TargetSequence t{{static_cast<int>(rng.below(16))}};
    const ReconstructionResult r =
        optimize_reconstruction(w, t, {}, stop, {}, seed);
    if (r.converged && r.accuracy_history.back() == 1.0) ++converged;
  }
  EXPECT_GE(converged, 9);
}

TEST(OptimizeReconstructionTest, HistoriesAndStopFlagAgree) {
  const ModelWeights w = init_random_weights(TinyConfig(2));
  const TargetSequence t{{4, 9, 4, 12}};
  StoppingCriteria stop;
  stop.max_iterations = 300;
  const ReconstructionResult r = optimize_reconstruction(w, t, {}, stop, {}, 3);
  EXPECT_EQ(static_cast<int>(r.loss_history.size()), r.iterations_used);
  EXPECT_EQ(static_cast<int>(r.accuracy_history.size()), r.iterations_used);
  EXPECT_EQ(r.converged, r.accuracy_history.back() >= stop.accuracy_threshold);
  const ForwardTrace trace = forward(w, assemble_input(r.pair, 4), false);
  EXPECT_DOUBLE_EQ(token_accuracy(trace, t), r.accuracy_history.back());
  if (r.converged) {
    int agree = 0;
    for (int i = 0; i < 4; ++i) agree += r.decoded[i] == t.tokens[i];
    EXPECT_GE(agree / 4.0, stop.accuracy_threshold);
  }
}

TEST(DecodeTest, MatchesForwardArgmax) {
  const ModelWeights w = init_random_weights(TinyConfig(4));
  const ProtoTokenPair p = init_pair(8, 77);
  const std::vector<int> decoded = decode(w, p, 5);
  EXPECT_EQ(decoded, decode(w, p, 5));

  Matrix rows(5, 8);
  rows.row(0) = p.e.transpose();
  for (int i = 1; i < 5; ++i) rows.row(i) = p.m.transpose();
  const ForwardTrace trace = forward(w, EmbeddingSequence(rows), false);
  ASSERT_EQ(decoded.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    int best = 0;
    for (int k = 1; k < 16; ++k)
      if (trace.logits(i, k) > trace.logits(i, best)) best = k;
    EXPECT_EQ(decoded[i], best);
  }
}

TEST(GradientRoutingTest, RowsSplitIntoEAndM) {
  const ModelWeights w = init_random_weights(TinyConfig(5));
  const ProtoTokenPair p = init_pair(8, 12);
  const TargetSequence t{{1, 2, 3, 4, 5}};
  const InputGradient g =
      input_gradients(w, assemble_input(p, 5), cross_entropy_loss(t));
  const PairGradient routed = route_gradient(g.gradient);
  EXPECT_EQ(routed.e, Vector(g.gradient.row(0).transpose()));
  Vector sum = Vector::Zero(8);
  for (int i = 1; i < 5; ++i) sum += g.gradient.row(i).transpose();
  EXPECT_LT((routed.m - sum).norm(), 1e-15);

  // The routed gradient is the derivative with respect to the pair itself.
  const double h = 1e-6;
  for (int j = 0; j < 8; ++j) {
    ProtoTokenPair up = p, down = p;
    up.m[j] += h;
    down.m[j] -= h;
    const double fd = (cross_entropy(forward(w, assemble_input(up, 5), false), t) -
                       cross_entropy(forward(w, assemble_input(down, 5), false), t)) /
                      (2 * h);
    EXPECT_NEAR(routed.m[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(ReconstructionJsonlTest, RoundTrip) {
  const ModelWeights w = init_random_weights(TinyConfig(6));
  StoppingCriteria stop;
  stop.max_iterations = 5;
  stop.accuracy_threshold = 1.0;
  const ReconstructionResult r =
      optimize_reconstruction(w, TargetSequence{{1, 2, 3}}, {}, stop, {}, 9);
  std::stringstream ss;
  write_jsonl(ss, r);
  int lines = 0;
  for (char c : ss.str()) lines += c == '\n';
  EXPECT_EQ(lines, r.iterations_used + 1);
  const ReconstructionResult back = read_reconstruction_jsonl(ss);
  EXPECT_EQ(back.pair.e, r.pair.e);
  EXPECT_EQ(back.pair.m, r.pair.m);
  EXPECT_EQ(back.loss_history, r.loss_history);
  EXPECT_EQ(back.accuracy_history, r.accuracy_history);
  EXPECT_EQ(back.iterations_used, r.iterations_used);
  EXPECT_EQ(back.converged, r.converged);
  EXPECT_EQ(back.decoded, r.decoded);
}

}  // namespace
}  // namespace protolab
