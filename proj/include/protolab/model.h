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

#ifndef PROTOLAB_MODEL_H_
#define PROTOLAB_MODEL_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "protolab/common.h"

namespace protolab {

// Shape of the frozen decoder-only transformer.
struct ModelConfig {
  int hidden_size = 64;
  int num_layers = 2;
  int num_heads = 4;
  int mlp_hidden = 256;
  int vocab_size = 256;
  int max_positions = 64;
  double norm_epsilon = 1e-5;
  std::uint64_t seed = 0;
  // Add the learned positional table to every input row, proto-tokens
  // included.
  bool positional_on_inputs = true;

  int head_dim() const { return num_heads > 0 ? hidden_size / num_heads : 0; }

  // Throws ConfigError on non-positive dimensions or when hidden_size is not
  // a multiple of num_heads.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// One pre-norm decoder block. Projections act on row vectors: y = x * W.
struct LayerWeights {
  Vector attn_norm;  // d
  Matrix w_query;    // d x d
  Matrix w_key;      // d x d
  Matrix w_value;    // d x d
  Matrix w_out;      // d x d
  Vector mlp_norm;   // d
  Matrix w_up;       // d x mlp_hidden
  Vector b_up;       // mlp_hidden
  Matrix w_down;     // mlp_hidden x d
  Vector b_down;     // d
};

// Named view of one tensor for serialization. Vectors have a single dim.
struct TensorView {
  std::string name;
  std::vector<Eigen::Index> shape;
  const double* data;
};

// Frozen weights. Construction validates shapes and finiteness; there is no
// mutable access afterwards.
class ModelWeights {
 public:
  ModelWeights(ModelConfig config, std::vector<LayerWeights> layers,
               Vector final_norm, Matrix unembedding, Matrix positional);

  const ModelConfig& config() const { return config_; }
  const LayerWeights& layer(int index) const { return layers_.at(index); }
  const Vector& final_norm() const { return final_norm_; }
  const Matrix& unembedding() const { return unembedding_; }  // d x |V|
  const Matrix& positional() const { return positional_; }    // P x d

  // Every tensor in file order.
  std::vector<TensorView> tensors() const;

  bool operator==(const ModelWeights& other) const;

 private:
  ModelConfig config_;
  std::vector<LayerWeights> layers_;
  Vector final_norm_;
  Matrix unembedding_;
  Matrix positional_;
};

// Ordered tensor names and shapes implied by a config.
std::vector<std::pair<std::string, std::vector<Eigen::Index>>> tensor_manifest(
    const ModelConfig& config);

// Constant initial values for the norm scales and the spread of the
// positional table. The defaults give a random model whose outputs depend on
// position and on the proto-tokens sharply enough to be fitted at d = 64:
// sharper attention (attn gain 2), peaked logits (final gain 4), and a
// positional table that does not drown the input rows.
struct RandomInitOptions {
  double attn_norm_gain = 2.0;
  double mlp_norm_gain = 1.0;
  double final_norm_gain = 4.0;
  double positional_std = 0.3;
};

// Seed-deterministic random weights. Projections and the unembedding are
// N(0, 1/d), the MLP down projection N(0, 1/mlp_hidden), biases 0.
ModelWeights init_random_weights(const ModelConfig& config,
                                 const RandomInitOptions& options = {});

// T input rows of width d.
class EmbeddingSequence {
 public:
  explicit EmbeddingSequence(Matrix rows);

  int length() const { return static_cast<int>(rows_.rows()); }
  int dim() const { return static_cast<int>(rows_.cols()); }
  const Matrix& rows() const { return rows_; }

 private:
  Matrix rows_;
};

// Attention probabilities indexed [layer][head][query][key].
class AttentionTensor {
 public:
  AttentionTensor(int layers, int heads, int length);

  int layers() const { return layers_; }
  int heads() const { return heads_; }
  int length() const { return length_; }

  double at(int layer, int head, int query, int key) const {
    return data_[index(layer, head, query, key)];
  }
  double& at(int layer, int head, int query, int key) {
    return data_[index(layer, head, query, key)];
  }

 private:
  std::size_t index(int layer, int head, int query, int key) const {
    return ((static_cast<std::size_t>(layer) * heads_ + head) * length_ +
            query) *
               length_ +
           key;
  }

  int layers_;
  int heads_;
  int length_;
  std::vector<double> data_;
};

// Intermediate values kept for the reverse pass.
struct Activations;

struct ForwardTrace {
  Matrix logits;  // T x |V|
  std::optional<AttentionTensor> attention;
  std::shared_ptr<const Activations> activations;

  int length() const { return static_cast<int>(logits.rows()); }
};

// Causal forward pass. Throws ArgumentError when T exceeds max_positions or
// the row width differs from hidden_size, NumericError (with the layer
// index) on non-finite activations.
ForwardTrace forward(const ModelWeights& weights, const EmbeddingSequence& input,
                     bool capture_attention);

// Reverse pass from dLoss/dLogits to dLoss/dInput for a trace produced by
// forward() on the same weights.
Matrix backward_to_input(const ModelWeights& weights, const ForwardTrace& trace,
                         const Matrix& dlogits);

// A scalar loss over one forward pass.
struct LossSpec {
  // Loss value from logits; writes dLoss/dLogits when the pointer is set.
  std::function<double(const Matrix& logits, Matrix* dlogits)> logits_term;
  // Optional term on the raw input rows; adds into dinput when set.
  std::function<double(const Matrix& input, Matrix* dinput)> input_term;
  double scale = 1.0;
};

struct InputGradient {
  double loss = 0.0;
  Matrix gradient;  // T x d
  ForwardTrace trace;
};

// Exact dLoss/dInput by reverse mode. Weights receive nothing.
InputGradient input_gradients(const ModelWeights& weights,
                              const EmbeddingSequence& input,
                              const LossSpec& loss,
                              bool capture_attention = false);

// Weights file I/O; the byte layout is described in docs/weights_format.md.
void save_weights(const std::string& path, const ModelWeights& weights);
ModelWeights load_weights(const std::string& path);

}  // namespace protolab

#endif  // PROTOLAB_MODEL_H_
