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

#include "protolab/analysis.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "protolab/random.h"

namespace protolab {

AttentionToE::AttentionToE(int layers, int heads, int length)
    : layers_(layers), heads_(heads), length_(length) {
  if (layers < 1 || heads < 1 || length < 1)
    throw ArgumentError("attention dimensions must be positive");
  data_.assign(static_cast<std::size_t>(layers) * heads * length, 0.0);
}

void AttentionToE::check(int layer, int head, int query) const {
  if (layer < 0 || layer >= layers_)
    throw IndexError("layer " + std::to_string(layer) + " out of range [0, " +
                     std::to_string(layers_) + ")");
  if (head < 0 || head >= heads_)
    throw IndexError("head " + std::to_string(head) + " out of range");
  if (query < 0 || query >= length_)
    throw IndexError("query " + std::to_string(query) + " out of range");
}

double AttentionToE::at(int layer, int head, int query) const {
  check(layer, head, query);
  return data_[(static_cast<std::size_t>(layer) * heads_ + head) * length_ +
               query];
}

double& AttentionToE::at(int layer, int head, int query) {
  check(layer, head, query);
  return data_[(static_cast<std::size_t>(layer) * heads_ + head) * length_ +
               query];
}

AttentionToE attention_to_e(const ForwardTrace& trace) {
  if (!trace.attention)
    throw ArgumentError("attention was not captured for this trace");
  const AttentionTensor& a = *trace.attention;
  AttentionToE out(a.layers(), a.heads(), a.length());
  for (int l = 0; l < a.layers(); ++l)
    for (int h = 0; h < a.heads(); ++h)
      for (int q = 0; q < a.length(); ++q) out.at(l, h, q) = a.at(l, h, q, 0);
  return out;
}

Vector mean_attention_over_heads(const AttentionToE& att, int layer) {
  if (layer < 0 || layer >= att.layers())
    throw IndexError("layer " + std::to_string(layer) + " out of range [0, " +
                     std::to_string(att.layers()) + ")");
  Vector out = Vector::Zero(att.length());
  for (int q = 0; q < att.length(); ++q) {
    for (int h = 0; h < att.heads(); ++h) out[q] += att.at(layer, h, q);
    out[q] /= att.heads();
  }
  return out;
}

Matrix layer_heatmap(const AttentionToE& att, const std::vector<int>& layers) {
  Matrix out(static_cast<int>(layers.size()), att.length());
  for (std::size_t i = 0; i < layers.size(); ++i)
    out.row(static_cast<int>(i)) =
        mean_attention_over_heads(att, layers[i]).transpose();
  return out;
}

void write_heatmap_csv(std::ostream& out, const Matrix& heatmap,
                       const std::vector<int>& layers) {
  if (static_cast<int>(layers.size()) != heatmap.rows())
    throw ShapeError("heatmap rows and layer labels differ");
  out << "layer";
  for (int q = 0; q < heatmap.cols(); ++q) out << ',' << q;
  out << '\n' << std::setprecision(17);
  for (int r = 0; r < heatmap.rows(); ++r) {
    out << layers[r];
    for (int q = 0; q < heatmap.cols(); ++q) out << ',' << heatmap(r, q);
    out << '\n';
  }
}

void write_attention_csv(std::ostream& out, const AttentionToE& att) {
  out << "layer,head,query,attention_to_e\n" << std::setprecision(17);
  for (int l = 0; l < att.layers(); ++l)
    for (int h = 0; h < att.heads(); ++h)
      for (int q = 0; q < att.length(); ++q)
        out << l << ',' << h << ',' << q << ',' << att.at(l, h, q) << '\n';
}

void ProjectionConfig::validate() const {
  if (perplexity != 0.0 && !(perplexity > 1.0))
    throw ConfigError("perplexity must be > 1");
  if (iterations < 1) throw ConfigError("t-SNE iterations must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("t-SNE learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0) ||
      !(final_momentum >= 0.0 && final_momentum < 1.0))
    throw ConfigError("t-SNE momentum must be in [0, 1)");
  if (!(early_exaggeration >= 1.0))
    throw ConfigError("early_exaggeration must be >= 1");
  if (exaggeration_iterations < 0 || momentum_switch < 0)
    throw ConfigError("t-SNE schedule lengths must be >= 0");
  if (!(init_scale > 0.0)) throw ConfigError("t-SNE init_scale must be > 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!(min_gain > 0.0)) throw ConfigError("t-SNE min_gain must be > 0");
}

double resolve_perplexity(const ProjectionConfig& config, int n) {
  if (n < 3) throw ConfigError("t-SNE needs at least 3 points");
  double p = config.perplexity;
  if (p == 0.0) {
    p = std::min(30.0, (n - 1) / 3.0);
    if (p <= 1.0) p = n / 2.0;
  }
  if (p >= n)
    throw ConfigError("perplexity " + std::to_string(p) +
                      " must be below the number of points " +
                      std::to_string(n));
  // A conditional over N - 1 neighbours has perplexity at most N - 1.
  if (p > n - 1)
    throw ConfigError("perplexity " + std::to_string(p) +
                      " is unreachable with " + std::to_string(n) + " points");
  return p;
}

Matrix pairwise_squared_distances(const Matrix& points) {
  const int n = static_cast<int>(points.rows());
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = (points.row(i) - points.row(j)).squaredNorm();
      d(j, i) = d(i, j);
    }
  return d;
}

namespace {

// Conditional row for precision beta; returns the entropy in nats.
double conditional_row(const Matrix& dist, int i, double beta, double dmin,
                       Vector& row) {
  const int n = static_cast<int>(dist.rows());
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    row[j] = j == i ? 0.0 : std::exp(-beta * (dist(i, j) - dmin));
    sum += row[j];
  }
  double h = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    row[j] /= sum;
    if (row[j] > 0.0) h -= row[j] * std::log(row[j]);
  }
  return h;
}

}  // namespace

InputAffinities input_affinities(const Matrix& points, double perplexity) {
  const int n = static_cast<int>(points.rows());
  if (n < 3) throw ConfigError("t-SNE needs at least 3 points");
  if (!points.allFinite()) throw ArgumentError("t-SNE input is not finite");
  const Matrix dist = pairwise_squared_distances(points);
  InputAffinities out;
  out.degenerate = dist.maxCoeff() == 0.0;
  const double target = std::log(perplexity);
  Matrix cond = Matrix::Zero(n, n);
  out.beta.assign(n, 1.0);
  out.perplexity.assign(n, 0.0);
  Vector row(n);
  for (int i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, dist(i, j));
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = conditional_row(dist, i, beta, dmin, row);
    for (int iter = 0; iter < 500 && !out.degenerate; ++iter) {
      if (std::abs(h - target) < 1e-12) break;
      // Entropy falls as beta rises.
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = conditional_row(dist, i, beta, dmin, row);
    }
    out.beta[i] = beta;
    out.perplexity[i] = std::exp(h);
    cond.row(i) = row.transpose();
  }
  out.joint = (cond + cond.transpose()) / (2.0 * n);
  return out;
}

namespace {

// Student-t kernel 1 / (1 + |y_i - y_j|^2) with a zero diagonal.
Matrix student_kernel(const Matrix& y) {
  const int n = static_cast<int>(y.rows());
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      w(i, j) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      w(j, i) = w(i, j);
    }
  return w;
}

}  // namespace

double tsne_kl(const Matrix& joint, const Matrix& y) {
  const Matrix w = student_kernel(y);
  const double z = w.sum();
  double kl = 0.0;
  for (int i = 0; i < joint.rows(); ++i)
    for (int j = 0; j < joint.cols(); ++j) {
      if (i == j || joint(i, j) <= 0.0) continue;
      kl += joint(i, j) * std::log(joint(i, j) / (w(i, j) / z));
    }
  return kl;
}

Matrix tsne_gradient(const Matrix& joint, const Matrix& y, double exaggeration) {
  const int n = static_cast<int>(y.rows());
  const Matrix w = student_kernel(y);
  const double z = w.sum();
  Matrix grad = Matrix::Zero(n, y.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double coeff = 4.0 * (exaggeration * joint(i, j) - w(i, j) / z) * w(i, j);
      grad.row(i) += coeff * (y.row(i) - y.row(j));
    }
  return grad;
}

Projection2D tsne_project(const Matrix& points, const ProjectionConfig& config) {
  config.validate();
  const int n = static_cast<int>(points.rows());
  Projection2D out;
  out.perplexity = resolve_perplexity(config, n);
  const InputAffinities aff = input_affinities(points, out.perplexity);
  out.achieved_perplexity = aff.perplexity;
  out.degenerate = aff.degenerate;

  Rng rng(config.seed);
  Matrix y(n, 2);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 2; ++k) y(i, k) = config.init_scale * rng.normal();
  if (out.degenerate) {
    out.coords = y;
    out.kl = tsne_kl(aff.joint, y);
    return out;
  }

  Matrix update = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  for (int it = 0; it < config.iterations; ++it) {
    const double exag =
        it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double mom =
        it < config.momentum_switch ? config.momentum : config.final_momentum;
    const Matrix grad = tsne_gradient(aff.joint, y, exag);
    if (config.adaptive_gains) {
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) {
          const bool flipped = (grad(i, k) > 0.0) == (update(i, k) > 0.0);
          gains(i, k) = flipped ? gains(i, k) * 0.8 : gains(i, k) + 0.2;
          gains(i, k) = std::max(gains(i, k), config.min_gain);
        }
    }
    update = mom * update - config.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite())
      throw NumericError("t-SNE layout diverged at iteration " +
                             std::to_string(it + 1),
                         it + 1);
    const int done = it + 1;
    if (config.checkpoint_every > 0 &&
        (done % config.checkpoint_every == 0 || done == config.iterations))
      out.kl_history.emplace_back(done, tsne_kl(aff.joint, y));
  }
  out.coords = y;
  out.kl = tsne_kl(aff.joint, y);
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

void write_projection_csv(std::ostream& out, const Projection2D& projection,
                          const std::vector<std::string>& ids,
                          const std::vector<std::string>& labels) {
  const auto n = static_cast<std::size_t>(projection.coords.rows());
  if (ids.size() != n || labels.size() != n)
    throw ShapeError("projection ids and labels must match the point count");
  out << "id,x,y,label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < n; ++i)
    out << csv_field(ids[i]) << ',' << projection.coords(i, 0) << ','
        << projection.coords(i, 1) << ',' << csv_field(labels[i]) << '\n';
}

}  // namespace protolab
