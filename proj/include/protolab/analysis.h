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

#ifndef PROTOLAB_ANALYSIS_H_
#define PROTOLAB_ANALYSIS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "protolab/common.h"
#include "protolab/model.h"

namespace protolab {

// Attention weight from every query position to key 0 (the e-token), indexed
// [layer][head][query].
class AttentionToE {
 public:
  AttentionToE(int layers, int heads, int length);

  int layers() const { return layers_; }
  int heads() const { return heads_; }
  int length() const { return length_; }

  double at(int layer, int head, int query) const;
  double& at(int layer, int head, int query);

 private:
  void check(int layer, int head, int query) const;

  int layers_;
  int heads_;
  int length_;
  std::vector<double> data_;
};

// Throws ArgumentError when the trace was produced without attention capture.
AttentionToE attention_to_e(const ForwardTrace& trace);

// Mean over heads at each query position. Throws IndexError on a bad layer.
Vector mean_attention_over_heads(const AttentionToE& att, int layer);

// One mean_attention_over_heads row per requested layer, in the given order.
Matrix layer_heatmap(const AttentionToE& att, const std::vector<int>& layers);

// CSV with header layer,0,1,...,T-1 and one row per layer.
void write_heatmap_csv(std::ostream& out, const Matrix& heatmap,
                       const std::vector<int>& layers);
// Long-form per-head CSV: layer,head,query,attention_to_e.
void write_attention_csv(std::ostream& out, const AttentionToE& att);

struct ProjectionConfig {
  // 0 selects min(30, (N - 1) / 3), or N / 2 when that is not above 1.
  double perplexity = 0.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double init_scale = 1e-4;
  // Per-coordinate step gains: +0.2 while the gradient keeps its direction
  // against the running update, x0.8 when it flips, floored at min_gain.
  bool adaptive_gains = true;
  double min_gain = 0.01;
  std::uint64_t seed = 0;
  // Record the un-exaggerated KL every this many iterations (and at the end).
  // 0 disables the history.
  int checkpoint_every = 50;

  void validate() const;
};

double resolve_perplexity(const ProjectionConfig& config, int n);

struct InputAffinities {
  Matrix joint;                   // symmetric, sums to 1
  std::vector<double> beta;       // per-point precision 1 / (2 sigma^2)
  std::vector<double> perplexity; // achieved per-point perplexity
  bool degenerate = false;        // every input point identical
};

Matrix pairwise_squared_distances(const Matrix& points);

// Conditional Gaussians calibrated by bisection so that each point's
// perplexity hits the target, symmetrized to (P + P^T) / 2N.
InputAffinities input_affinities(const Matrix& points, double perplexity);

// KL(P || Q) for the Student-t affinities Q of layout y.
double tsne_kl(const Matrix& joint, const Matrix& y);
// dKL/dy with P scaled by `exaggeration`.
Matrix tsne_gradient(const Matrix& joint, const Matrix& y,
                     double exaggeration = 1.0);

struct Projection2D {
  Matrix coords;  // N x 2
  double kl = 0.0;
  double perplexity = 0.0;
  bool degenerate = false;
  std::vector<double> achieved_perplexity;
  std::vector<std::pair<int, double>> kl_history;  // (iteration, KL)
};

// Exact all-pairs t-SNE of the rows of `points` into two dimensions.
Projection2D tsne_project(const Matrix& points, const ProjectionConfig& config);

// CSV with header id,x,y,label.
void write_projection_csv(std::ostream& out, const Projection2D& projection,
                          const std::vector<std::string>& ids,
                          const std::vector<std::string>& labels);

}  // namespace protolab

#endif  // PROTOLAB_ANALYSIS_H_
