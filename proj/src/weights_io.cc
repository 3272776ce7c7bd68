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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "protolab/model.h"

namespace protolab {
namespace {

constexpr const char* kMagic = "protolab-weights";
constexpr int kFormatVersion = 1;

std::string shape_string(const std::vector<Eigen::Index>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    out << (i ? " " : "") << shape[i];
  out << "]";
  return out.str();
}

void write_le(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = (bits >> (8 * b)) & 0xffu;
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

double read_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[b]} << (8 * b);
  return std::bit_cast<double>(bits);
}

std::string next_header_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw LoadError("malformed header: unexpected end of file");
  return line;
}

template <typename T>
T parse_field(std::istream& in, const std::string& key) {
  std::istringstream line(next_header_line(in));
  std::string name;
  T value{};
  if (!(line >> name >> value) || name != key)
    throw LoadError("malformed header: expected field '" + key + "'");
  return value;
}

}  // namespace

void save_weights(const std::string& path, const ModelWeights& weights) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  const ModelConfig& c = weights.config();
  const auto tensors = weights.tensors();
  out << kMagic << " v" << kFormatVersion << "\n";
  out << "hidden_size " << c.hidden_size << "\n";
  out << "num_layers " << c.num_layers << "\n";
  out << "num_heads " << c.num_heads << "\n";
  out << "head_dim " << c.head_dim() << "\n";
  out << "mlp_hidden " << c.mlp_hidden << "\n";
  out << "vocab_size " << c.vocab_size << "\n";
  out << "max_positions " << c.max_positions << "\n";
  out << "norm_epsilon " << std::setprecision(17) << c.norm_epsilon << "\n";
  out << "seed " << c.seed << "\n";
  out << "positional_on_inputs " << (c.positional_on_inputs ? 1 : 0) << "\n";
  out << "tensor_count " << tensors.size() << "\n";
  for (const TensorView& t : tensors) {
    out << "tensor " << t.name;
    for (Eigen::Index s : t.shape) out << " " << s;
    out << "\n";
  }
  out << "end_header\n";
  for (const TensorView& t : tensors) {
    Eigen::Index n = 1;
    for (Eigen::Index s : t.shape) n *= s;
    write_le(out, t.data, n);
  }
  if (!out) throw Error("failed writing weights to '" + path + "'");
}

ModelWeights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open weights file '" + path + "'");

  {
    std::istringstream magic(next_header_line(in));
    std::string word, version;
    if (!(magic >> word >> version) || word != kMagic)
      throw LoadError("malformed header: not a protolab weights file");
    if (version != "v" + std::to_string(kFormatVersion))
      throw LoadError("malformed header: unsupported format version " +
                      version);
  }

  ModelConfig c;
  c.hidden_size = parse_field<int>(in, "hidden_size");
  c.num_layers = parse_field<int>(in, "num_layers");
  c.num_heads = parse_field<int>(in, "num_heads");
  const int head_dim = parse_field<int>(in, "head_dim");
  c.mlp_hidden = parse_field<int>(in, "mlp_hidden");
  c.vocab_size = parse_field<int>(in, "vocab_size");
  c.max_positions = parse_field<int>(in, "max_positions");
  c.norm_epsilon = parse_field<double>(in, "norm_epsilon");
  c.seed = parse_field<std::uint64_t>(in, "seed");
  c.positional_on_inputs = parse_field<int>(in, "positional_on_inputs") != 0;
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("malformed header: ") + e.what());
  }
  if (head_dim != c.head_dim())
    throw LoadError("malformed header: head_dim inconsistent with "
                    "hidden_size / num_heads");

  const auto expected = tensor_manifest(c);
  const auto count = parse_field<std::size_t>(in, "tensor_count");
  if (count != expected.size()) {
    throw LoadError("malformed header: tensor_count " + std::to_string(count) +
                    " but configuration implies " +
                    std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    std::istringstream line(next_header_line(in));
    std::string tag, declared_name;
    line >> tag >> declared_name;
    if (tag != "tensor")
      throw LoadError("malformed header: expected tensor entry for '" + name +
                      "'");
    if (declared_name != name)
      throw LoadError("malformed header: expected tensor '" + name +
                      "', found '" + declared_name + "'");
    std::vector<Eigen::Index> declared;
    Eigen::Index s;
    while (line >> s) declared.push_back(s);
    if (declared != shape) {
      throw LoadError("shape mismatch for tensor '" + name + "': header implies " +
                      shape_string(shape) + ", manifest declares " +
                      shape_string(declared));
    }
  }
  if (next_header_line(in) != "end_header")
    throw LoadError("malformed header: missing end_header");

  std::map<std::string, std::vector<double>> blobs;
  for (const auto& [name, shape] : expected) {
    Eigen::Index n = 1;
    for (Eigen::Index dim : shape) n *= dim;
    std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 8);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
      throw LoadError("unexpected end of tensor data in tensor '" + name + "'");
    std::vector<double> values(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      values[i] = read_le(raw.data() + 8 * i);
      if (!std::isfinite(values[i]))
        throw LoadError("non-finite entry in tensor '" + name + "'");
    }
    blobs.emplace(name, std::move(values));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw LoadError("trailing bytes after the last tensor");

  auto matrix = [&](const std::string& name, Eigen::Index r, Eigen::Index k) {
    return Matrix(Eigen::Map<const Matrix>(blobs.at(name).data(), r, k));
  };
  auto vector = [&](const std::string& name, Eigen::Index n) {
    return Vector(Eigen::Map<const Vector>(blobs.at(name).data(), n));
  };
  const Eigen::Index d = c.hidden_size;
  const Eigen::Index f = c.mlp_hidden;
  std::vector<LayerWeights> layers(c.num_layers);
  for (int l = 0; l < c.num_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerWeights& w = layers[l];
    w.attn_norm = vector(p + "attn_norm", d);
    w.w_query = matrix(p + "w_query", d, d);
    w.w_key = matrix(p + "w_key", d, d);
    w.w_value = matrix(p + "w_value", d, d);
    w.w_out = matrix(p + "w_out", d, d);
    w.mlp_norm = vector(p + "mlp_norm", d);
    w.w_up = matrix(p + "w_up", d, f);
    w.b_up = vector(p + "b_up", f);
    w.w_down = matrix(p + "w_down", f, d);
    w.b_down = vector(p + "b_down", d);
  }
  return ModelWeights(c, std::move(layers), vector("final_norm", d),
                      matrix("unembedding", d, c.vocab_size),
                      matrix("positional", c.max_positions, d));
}

}  // namespace protolab
