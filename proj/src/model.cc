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

#include "protolab/model.h"

#include <cmath>
#include <sstream>
#include <utility>

#include "protolab/random.h"

namespace protolab {

struct LayerCache {
  Matrix h_in;        // T x d, block input
  Vector rms_inv1;    // T
  Matrix normed1;     // T x d
  Matrix query;       // T x d
  Matrix key;         // T x d
  Matrix value;       // T x d
  std::vector<Matrix> probs;  // H of T x T
  Matrix context;     // T x d
  Matrix h_mid;       // T x d, after attention residual
  Vector rms_inv2;    // T
  Matrix normed2;     // T x d
  Matrix pre_act;     // T x mlp
  Matrix post_act;    // T x mlp
};

struct Activations {
  std::vector<LayerCache> layers;
  Matrix h_final;     // T x d, last block output
  Vector rms_inv_final;
  Matrix normed_final;
};

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// y_t = g * x_t / sqrt(mean(x_t^2) + eps), row by row.
void rms_norm(const Matrix& x, const Vector& scale, double eps, Matrix* out,
              Vector* inv) {
  const Eigen::Index rows = x.rows();
  const double d = static_cast<double>(x.cols());
  out->resize(rows, x.cols());
  inv->resize(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const double r = 1.0 / std::sqrt(x.row(t).squaredNorm() / d + eps);
    (*inv)[t] = r;
    out->row(t) = (x.row(t).array() * scale.transpose().array() * r).matrix();
  }
}

// Gradient of rms_norm with respect to x given dL/dy.
Matrix rms_norm_backward(const Matrix& x, const Vector& scale,
                         const Vector& inv, const Matrix& dy) {
  const double d = static_cast<double>(x.cols());
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double r = inv[t];
    const Eigen::RowVectorXd gdy =
        (dy.row(t).array() * scale.transpose().array()).matrix();
    const double proj = gdy.dot(x.row(t));
    dx.row(t) = r * gdy - (r * r * r / d) * proj * x.row(t);
  }
  return dx;
}

void check_finite(const Matrix& m, const char* what, int layer) {
  if (!m.allFinite()) {
    std::ostringstream msg;
    msg << "numeric overflow: non-finite " << what << " in layer " << layer;
    throw NumericError(msg.str(), layer);
  }
}

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                     double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

void expect_shape(const std::string& name, const Matrix& m, Eigen::Index rows,
                  Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream msg;
    msg << "shape mismatch for tensor '" << name << "': expected [" << rows
        << " " << cols << "], got [" << m.rows() << " " << m.cols() << "]";
    throw ShapeError(msg.str());
  }
  if (!m.allFinite())
    throw ValidationError("non-finite entry in tensor '" + name + "'");
}

void expect_shape(const std::string& name, const Vector& v, Eigen::Index n) {
  if (v.size() != n) {
    std::ostringstream msg;
    msg << "shape mismatch for tensor '" << name << "': expected [" << n
        << "], got [" << v.size() << "]";
    throw ShapeError(msg.str());
  }
  if (!v.allFinite())
    throw ValidationError("non-finite entry in tensor '" + name + "'");
}

std::string layer_name(int l, const char* field) {
  return "layers." + std::to_string(l) + "." + field;
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden_size < 1 || num_layers < 1 || num_heads < 1 || mlp_hidden < 1 ||
      vocab_size < 1 || max_positions < 1) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  if (hidden_size % num_heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) +
                      " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (!(norm_epsilon > 0.0) || !std::isfinite(norm_epsilon))
    throw ConfigError("norm_epsilon must be a positive finite number");
}

ModelWeights::ModelWeights(ModelConfig config, std::vector<LayerWeights> layers,
                           Vector final_norm, Matrix unembedding,
                           Matrix positional)
    : config_(std::move(config)),
      layers_(std::move(layers)),
      final_norm_(std::move(final_norm)),
      unembedding_(std::move(unembedding)),
      positional_(std::move(positional)) {
  config_.validate();
  const Eigen::Index d = config_.hidden_size;
  const Eigen::Index f = config_.mlp_hidden;
  if (static_cast<int>(layers_.size()) != config_.num_layers) {
    throw ShapeError("expected " + std::to_string(config_.num_layers) +
                     " layers, got " + std::to_string(layers_.size()));
  }
  for (int l = 0; l < config_.num_layers; ++l) {
    const LayerWeights& w = layers_[l];
    expect_shape(layer_name(l, "attn_norm"), w.attn_norm, d);
    expect_shape(layer_name(l, "w_query"), w.w_query, d, d);
    expect_shape(layer_name(l, "w_key"), w.w_key, d, d);
    expect_shape(layer_name(l, "w_value"), w.w_value, d, d);
    expect_shape(layer_name(l, "w_out"), w.w_out, d, d);
    expect_shape(layer_name(l, "mlp_norm"), w.mlp_norm, d);
    expect_shape(layer_name(l, "w_up"), w.w_up, d, f);
    expect_shape(layer_name(l, "b_up"), w.b_up, f);
    expect_shape(layer_name(l, "w_down"), w.w_down, f, d);
    expect_shape(layer_name(l, "b_down"), w.b_down, d);
  }
  expect_shape("final_norm", final_norm_, d);
  expect_shape("unembedding", unembedding_, d, config_.vocab_size);
  expect_shape("positional", positional_, config_.max_positions, d);
}

std::vector<TensorView> ModelWeights::tensors() const {
  std::vector<TensorView> out;
  auto add_m = [&](std::string name, const Matrix& m) {
    out.push_back({std::move(name), {m.rows(), m.cols()}, m.data()});
  };
  auto add_v = [&](std::string name, const Vector& v) {
    out.push_back({std::move(name), {v.size()}, v.data()});
  };
  for (int l = 0; l < config_.num_layers; ++l) {
    const LayerWeights& w = layers_[l];
    add_v(layer_name(l, "attn_norm"), w.attn_norm);
    add_m(layer_name(l, "w_query"), w.w_query);
    add_m(layer_name(l, "w_key"), w.w_key);
    add_m(layer_name(l, "w_value"), w.w_value);
    add_m(layer_name(l, "w_out"), w.w_out);
    add_v(layer_name(l, "mlp_norm"), w.mlp_norm);
    add_m(layer_name(l, "w_up"), w.w_up);
    add_v(layer_name(l, "b_up"), w.b_up);
    add_m(layer_name(l, "w_down"), w.w_down);
    add_v(layer_name(l, "b_down"), w.b_down);
  }
  add_v("final_norm", final_norm_);
  add_m("unembedding", unembedding_);
  add_m("positional", positional_);
  return out;
}

bool ModelWeights::operator==(const ModelWeights& other) const {
  if (!(config_ == other.config_)) return false;
  const auto a = tensors();
  const auto b = other.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape) return false;
    Eigen::Index n = 1;
    for (Eigen::Index s : a[i].shape) n *= s;
    for (Eigen::Index k = 0; k < n; ++k)
      if (a[i].data[k] != b[i].data[k]) return false;
  }
  return true;
}

std::vector<std::pair<std::string, std::vector<Eigen::Index>>> tensor_manifest(
    const ModelConfig& c) {
  const Eigen::Index d = c.hidden_size;
  const Eigen::Index f = c.mlp_hidden;
  std::vector<std::pair<std::string, std::vector<Eigen::Index>>> out;
  for (int l = 0; l < c.num_layers; ++l) {
    out.push_back({layer_name(l, "attn_norm"), {d}});
    out.push_back({layer_name(l, "w_query"), {d, d}});
    out.push_back({layer_name(l, "w_key"), {d, d}});
    out.push_back({layer_name(l, "w_value"), {d, d}});
    out.push_back({layer_name(l, "w_out"), {d, d}});
    out.push_back({layer_name(l, "mlp_norm"), {d}});
    out.push_back({layer_name(l, "w_up"), {d, f}});
    out.push_back({layer_name(l, "b_up"), {f}});
    out.push_back({layer_name(l, "w_down"), {f, d}});
    out.push_back({layer_name(l, "b_down"), {d}});
  }
  out.push_back({"final_norm", {d}});
  out.push_back({"unembedding", {d, c.vocab_size}});
  out.push_back({"positional", {c.max_positions, d}});
  return out;
}

ModelWeights init_random_weights(const ModelConfig& config,
                                 const RandomInitOptions& options) {
  config.validate();
  Rng rng(config.seed);
  const Eigen::Index d = config.hidden_size;
  const Eigen::Index f = config.mlp_hidden;
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double down_scale = 1.0 / std::sqrt(static_cast<double>(f));

  std::vector<LayerWeights> layers(config.num_layers);
  for (LayerWeights& w : layers) {
    w.attn_norm = Vector::Constant(d, options.attn_norm_gain);
    w.w_query = normal_matrix(rng, d, d, proj_scale);
    w.w_key = normal_matrix(rng, d, d, proj_scale);
    w.w_value = normal_matrix(rng, d, d, proj_scale);
    w.w_out = normal_matrix(rng, d, d, proj_scale);
    w.mlp_norm = Vector::Constant(d, options.mlp_norm_gain);
    w.w_up = normal_matrix(rng, d, f, proj_scale);
    w.b_up = Vector::Zero(f);
    w.w_down = normal_matrix(rng, f, d, down_scale);
    w.b_down = Vector::Zero(d);
  }
  Matrix unembedding = normal_matrix(rng, d, config.vocab_size, proj_scale);
  Matrix positional =
      normal_matrix(rng, config.max_positions, d, options.positional_std);
  return ModelWeights(config, std::move(layers),
                      Vector::Constant(d, options.final_norm_gain),
                      std::move(unembedding), std::move(positional));
}

EmbeddingSequence::EmbeddingSequence(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1)
    throw ArgumentError("embedding sequence must have at least one row");
  if (!rows_.allFinite())
    throw ArgumentError("embedding sequence contains non-finite entries");
}

AttentionTensor::AttentionTensor(int layers, int heads, int length)
    : layers_(layers),
      heads_(heads),
      length_(length),
      data_(static_cast<std::size_t>(layers) * heads * length * length, 0.0) {}

ForwardTrace forward(const ModelWeights& weights, const EmbeddingSequence& input,
                     bool capture_attention) {
  const ModelConfig& c = weights.config();
  const int T = input.length();
  if (T > c.max_positions) {
    throw ArgumentError("sequence length " + std::to_string(T) +
                        " exceeds max_positions " +
                        std::to_string(c.max_positions));
  }
  if (input.dim() != c.hidden_size) {
    throw ShapeError("input width " + std::to_string(input.dim()) +
                     " does not match hidden_size " +
                     std::to_string(c.hidden_size));
  }
  const int H = c.num_heads;
  const int hd = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  auto acts = std::make_shared<Activations>();
  acts->layers.resize(c.num_layers);

  Matrix h = input.rows();
  if (c.positional_on_inputs) h += weights.positional().topRows(T);

  for (int l = 0; l < c.num_layers; ++l) {
    const LayerWeights& w = weights.layer(l);
    LayerCache& lc = acts->layers[l];
    lc.h_in = h;
    rms_norm(h, w.attn_norm, c.norm_epsilon, &lc.normed1, &lc.rms_inv1);
    lc.query = lc.normed1 * w.w_query;
    lc.key = lc.normed1 * w.w_key;
    lc.value = lc.normed1 * w.w_value;
    lc.context = Matrix::Zero(T, c.hidden_size);
    lc.probs.assign(H, Matrix());
    for (int head = 0; head < H; ++head) {
      const auto q = lc.query.middleCols(head * hd, hd);
      const auto k = lc.key.middleCols(head * hd, hd);
      Matrix scores = (q * k.transpose()) * scale;
      Matrix& p = lc.probs[head];
      p = Matrix::Zero(T, T);
      for (int i = 0; i < T; ++i) {
        const double mx = scores.row(i).head(i + 1).maxCoeff();
        double sum = 0.0;
        for (int j = 0; j <= i; ++j) {
          const double e = std::exp(scores(i, j) - mx);
          p(i, j) = e;
          sum += e;
        }
        p.row(i).head(i + 1) /= sum;
      }
      lc.context.middleCols(head * hd, hd) =
          p * lc.value.middleCols(head * hd, hd);
    }
    lc.h_mid = h + lc.context * w.w_out;
    rms_norm(lc.h_mid, w.mlp_norm, c.norm_epsilon, &lc.normed2, &lc.rms_inv2);
    lc.pre_act = lc.normed2 * w.w_up;
    lc.pre_act.rowwise() += w.b_up.transpose();
    lc.post_act = lc.pre_act.unaryExpr([](double x) { return gelu(x); });
    h = lc.h_mid + lc.post_act * w.w_down;
    h.rowwise() += w.b_down.transpose();
    check_finite(h, "activation", l);
  }

  acts->h_final = h;
  rms_norm(h, weights.final_norm(), c.norm_epsilon, &acts->normed_final,
           &acts->rms_inv_final);

  ForwardTrace trace;
  trace.logits = acts->normed_final * weights.unembedding();
  check_finite(trace.logits, "logit", c.num_layers - 1);
  if (capture_attention) {
    AttentionTensor att(c.num_layers, H, T);
    for (int l = 0; l < c.num_layers; ++l)
      for (int head = 0; head < H; ++head)
        for (int i = 0; i < T; ++i)
          for (int j = 0; j < T; ++j)
            att.at(l, head, i, j) = acts->layers[l].probs[head](i, j);
    trace.attention = std::move(att);
  }
  trace.activations = std::move(acts);
  return trace;
}

Matrix backward_to_input(const ModelWeights& weights, const ForwardTrace& trace,
                         const Matrix& dlogits) {
  const ModelConfig& c = weights.config();
  if (!trace.activations)
    throw ArgumentError("trace carries no activations for the reverse pass");
  const Activations& acts = *trace.activations;
  const int T = trace.length();
  if (dlogits.rows() != T || dlogits.cols() != c.vocab_size)
    throw ShapeError("dlogits shape does not match the trace logits");
  const int H = c.num_heads;
  const int hd = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Matrix dnormed = dlogits * weights.unembedding().transpose();
  Matrix dh = rms_norm_backward(acts.h_final, weights.final_norm(),
                                acts.rms_inv_final, dnormed);

  for (int l = c.num_layers - 1; l >= 0; --l) {
    const LayerWeights& w = weights.layer(l);
    const LayerCache& lc = acts.layers[l];

    // MLP branch: h = h_mid + gelu(norm(h_mid) W_up + b_up) W_down + b_down.
    Matrix dpost = dh * w.w_down.transpose();
    Matrix dpre = dpost.cwiseProduct(
        lc.pre_act.unaryExpr([](double x) { return gelu_grad(x); }));
    Matrix dnormed2 = dpre * w.w_up.transpose();
    Matrix dh_mid =
        dh + rms_norm_backward(lc.h_mid, w.mlp_norm, lc.rms_inv2, dnormed2);

    // Attention branch: h_mid = h_in + context W_out.
    Matrix dcontext = dh_mid * w.w_out.transpose();
    Matrix dquery = Matrix::Zero(T, c.hidden_size);
    Matrix dkey = Matrix::Zero(T, c.hidden_size);
    Matrix dvalue = Matrix::Zero(T, c.hidden_size);
    for (int head = 0; head < H; ++head) {
      const Matrix& p = lc.probs[head];
      const auto dctx = dcontext.middleCols(head * hd, hd);
      Matrix dp = dctx * lc.value.middleCols(head * hd, hd).transpose();
      dvalue.middleCols(head * hd, hd) = p.transpose() * dctx;
      // Softmax Jacobian; masked entries have p == 0 and get no gradient.
      Matrix dscores(T, T);
      for (int i = 0; i < T; ++i) {
        const double dot = dp.row(i).dot(p.row(i));
        dscores.row(i) =
            (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
      }
      dscores *= scale;
      dquery.middleCols(head * hd, hd) =
          dscores * lc.key.middleCols(head * hd, hd);
      dkey.middleCols(head * hd, hd) =
          dscores.transpose() * lc.query.middleCols(head * hd, hd);
    }
    Matrix dnormed1 = dquery * w.w_query.transpose() +
                      dkey * w.w_key.transpose() +
                      dvalue * w.w_value.transpose();
    dh = dh_mid +
         rms_norm_backward(lc.h_in, w.attn_norm, lc.rms_inv1, dnormed1);
    check_finite(dh, "gradient", l);
  }
  // The positional table is an additive constant, so dX = dh.
  return dh;
}

InputGradient input_gradients(const ModelWeights& weights,
                              const EmbeddingSequence& input,
                              const LossSpec& loss, bool capture_attention) {
  if (!loss.logits_term) throw ArgumentError("loss has no logits term");
  InputGradient out;
  out.trace = forward(weights, input, capture_attention);
  Matrix dlogits = Matrix::Zero(out.trace.logits.rows(),
                                out.trace.logits.cols());
  double value = loss.logits_term(out.trace.logits, &dlogits);
  out.gradient = backward_to_input(weights, out.trace, dlogits);
  if (loss.input_term) value += loss.input_term(input.rows(), &out.gradient);
  if (loss.scale != 1.0) {
    value *= loss.scale;
    out.gradient *= loss.scale;
  }
  if (!std::isfinite(value) || !out.gradient.allFinite())
    throw NumericError("numeric overflow: non-finite loss or input gradient",
                       -1);
  out.loss = value;
  return out;
}

}  // namespace protolab
