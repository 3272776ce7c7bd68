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

#ifndef PROTOLAB_NOISE_H_
#define PROTOLAB_NOISE_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "protolab/common.h"
#include "protolab/model.h"
#include "protolab/prototoken.h"

namespace protolab {

enum class NoiseKind { kGaussian, kUniform, kExponential, kSinusoidal };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

// Shape of the raw noise before normalization. Only the fields of `kind` are
// read.
struct NoiseDistribution {
  NoiseKind kind = NoiseKind::kGaussian;
  double sigma = 1.0;
  double low = -1.0;
  double high = 1.0;
  double rate = 1.0;
  // Subtract the mean 1/rate from exponential draws.
  bool center = false;
  double omega = 0.1;
  double phi = 0.0;

  static NoiseDistribution gaussian(double sigma = 1.0);
  static NoiseDistribution uniform(double low = -1.0, double high = 1.0);
  static NoiseDistribution exponential(double rate = 1.0, bool center = false);
  static NoiseDistribution sinusoidal(double omega = 0.1, double phi = 0.0);

  std::string name() const { return to_string(kind); }
  void validate() const;
};

struct NoiseSpec {
  NoiseDistribution distribution;
  double alpha = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Raw draw of d entries. Sinusoidal noise is sin(omega * i + phi) over the
// coordinate index i and ignores the seed.
Vector sample_noise(const NoiseSpec& spec, int dim);

// eps / |eps| * alpha * |e|. alpha = 0 gives the zero vector for any eps.
// Throws ValidationError for a zero eps with alpha > 0.
Vector normalize_noise(const Vector& eps, const Vector& e, double alpha);

// e + normalize_noise(sample_noise(spec, d), e, alpha); m untouched.
ProtoTokenPair perturb_e(const ProtoTokenPair& pair, const NoiseSpec& spec);

const std::vector<double>& default_noise_alphas();
std::vector<NoiseDistribution> default_noise_kinds();

struct SweepCell {
  std::string kind;
  double alpha = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, 0 for one trial
  int trials = 0;
  std::vector<double> accuracies;
};

struct SweepResult {
  double baseline_accuracy = 0.0;
  int trials = 0;
  std::vector<SweepCell> cells;  // kinds outer, alphas inner

  const SweepCell& at(const std::string& kind, double alpha) const;
};

// Trial t of kind k draws with the same seed at every alpha, so accuracy
// differences across alphas are paired.
std::uint64_t noise_trial_seed(std::uint64_t seed, int kind_index, int trial);

SweepResult noise_sweep(const ModelWeights& model, const ProtoTokenPair& pair,
                        const TargetSequence& targets,
                        const std::vector<double>& alphas,
                        const std::vector<NoiseDistribution>& kinds, int trials,
                        std::uint64_t seed);

// CSV with header kind,alpha,mean_accuracy,std_accuracy,trials.
void write_csv(std::ostream& out, const SweepResult& result);

}  // namespace protolab

#endif  // PROTOLAB_NOISE_H_
