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

#include "protolab/noise.h"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "protolab/random.h"

namespace protolab {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussian:
      return "gaussian";
    case NoiseKind::kUniform:
      return "uniform";
    case NoiseKind::kExponential:
      return "exponential";
    case NoiseKind::kSinusoidal:
      return "sinusoidal";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(const std::string& name) {
  for (NoiseKind k : {NoiseKind::kGaussian, NoiseKind::kUniform,
                      NoiseKind::kExponential, NoiseKind::kSinusoidal})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown noise kind '" + name + "'");
}

NoiseDistribution NoiseDistribution::gaussian(double sigma) {
  NoiseDistribution d;
  d.kind = NoiseKind::kGaussian;
  d.sigma = sigma;
  return d;
}

NoiseDistribution NoiseDistribution::uniform(double low, double high) {
  NoiseDistribution d;
  d.kind = NoiseKind::kUniform;
  d.low = low;
  d.high = high;
  return d;
}

NoiseDistribution NoiseDistribution::exponential(double rate, bool center) {
  NoiseDistribution d;
  d.kind = NoiseKind::kExponential;
  d.rate = rate;
  d.center = center;
  return d;
}

NoiseDistribution NoiseDistribution::sinusoidal(double omega, double phi) {
  NoiseDistribution d;
  d.kind = NoiseKind::kSinusoidal;
  d.omega = omega;
  d.phi = phi;
  return d;
}

void NoiseDistribution::validate() const {
  switch (kind) {
    case NoiseKind::kGaussian:
      if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ConfigError("gaussian noise needs sigma > 0");
      break;
    case NoiseKind::kUniform:
      if (!(low < high) || !std::isfinite(low) || !std::isfinite(high))
        throw ConfigError("uniform noise needs low < high");
      break;
    case NoiseKind::kExponential:
      if (!(rate > 0.0) || !std::isfinite(rate))
        throw ConfigError("exponential noise needs rate > 0");
      break;
    case NoiseKind::kSinusoidal:
      if (!std::isfinite(omega) || !std::isfinite(phi))
        throw ConfigError("sinusoidal noise needs finite omega and phi");
      break;
  }
}

void NoiseSpec::validate() const {
  distribution.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ConfigError("noise alpha must be finite and >= 0");
}

Vector sample_noise(const NoiseSpec& spec, int dim) {
  spec.validate();
  if (dim < 1) throw ArgumentError("noise dimension must be positive");
  const NoiseDistribution& d = spec.distribution;
  Vector eps(dim);
  Rng rng(spec.seed);
  for (int i = 0; i < dim; ++i) {
    switch (d.kind) {
      case NoiseKind::kGaussian:
        eps[i] = d.sigma * rng.normal();
        break;
      case NoiseKind::kUniform:
        eps[i] = rng.uniform(d.low, d.high);
        break;
      case NoiseKind::kExponential:
        eps[i] = rng.exponential(d.rate) - (d.center ? 1.0 / d.rate : 0.0);
        break;
      case NoiseKind::kSinusoidal:
        eps[i] = std::sin(d.omega * i + d.phi);
        break;
    }
  }
  return eps;
}

Vector normalize_noise(const Vector& eps, const Vector& e, double alpha) {
  if (eps.size() != e.size())
    throw ArgumentError("noise and embedding differ in dimension");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ArgumentError("noise alpha must be finite and >= 0");
  if (alpha == 0.0) return Vector::Zero(e.size());
  const double n = eps.norm();
  if (n == 0.0 || !std::isfinite(n))
    throw ValidationError("degenerate noise: zero or non-finite norm");
  return eps / n * (alpha * e.norm());
}

ProtoTokenPair perturb_e(const ProtoTokenPair& pair, const NoiseSpec& spec) {
  ProtoTokenPair out = pair;
  out.e = pair.e + normalize_noise(sample_noise(spec, pair.dim()), pair.e,
                                   spec.alpha);
  return out;
}

const std::vector<double>& default_noise_alphas() {
  static const std::vector<double> alphas = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0};
  return alphas;
}

std::vector<NoiseDistribution> default_noise_kinds() {
  return {NoiseDistribution::gaussian(), NoiseDistribution::uniform(),
          NoiseDistribution::exponential(), NoiseDistribution::sinusoidal()};
}

const SweepCell& SweepResult::at(const std::string& kind, double alpha) const {
  for (const SweepCell& c : cells)
    if (c.kind == kind && c.alpha == alpha) return c;
  throw LookupError("no sweep cell for " + kind);
}

std::uint64_t noise_trial_seed(std::uint64_t seed, int kind_index, int trial) {
  return derive_seed(seed, {static_cast<std::uint64_t>(kind_index),
                            static_cast<std::uint64_t>(trial)});
}

SweepResult noise_sweep(const ModelWeights& model, const ProtoTokenPair& pair,
                        const TargetSequence& targets,
                        const std::vector<double>& alphas,
                        const std::vector<NoiseDistribution>& kinds, int trials,
                        std::uint64_t seed) {
  if (alphas.empty()) throw ConfigError("noise sweep needs at least one alpha");
  if (kinds.empty()) throw ConfigError("noise sweep needs at least one kind");
  if (trials < 1) throw ConfigError("noise sweep needs trials >= 1");
  targets.validate(model.config());
  for (const NoiseDistribution& k : kinds) k.validate();
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a))
      throw ConfigError("noise alpha must be finite and >= 0");

  SweepResult result;
  result.trials = trials;
  result.baseline_accuracy = token_accuracy(
      forward(model, assemble_input(pair, targets.length()), false), targets);
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    for (double alpha : alphas) {
      SweepCell cell;
      cell.kind = kinds[k].name();
      cell.alpha = alpha;
      cell.trials = trials;
      for (int t = 0; t < trials; ++t) {
        const NoiseSpec spec{kinds[k], alpha,
                             noise_trial_seed(seed, static_cast<int>(k), t)};
        const ProtoTokenPair noisy = perturb_e(pair, spec);
        cell.accuracies.push_back(token_accuracy(
            forward(model, assemble_input(noisy, targets.length()), false),
            targets));
      }
      double sum = 0.0;
      for (double a : cell.accuracies) sum += a;
      cell.mean_accuracy = sum / trials;
      double ss = 0.0;
      for (double a : cell.accuracies)
        ss += (a - cell.mean_accuracy) * (a - cell.mean_accuracy);
      cell.std_accuracy = trials > 1 ? std::sqrt(ss / (trials - 1)) : 0.0;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

void write_csv(std::ostream& out, const SweepResult& result) {
  out << "kind,alpha,mean_accuracy,std_accuracy,trials\n";
  out << std::setprecision(17);
  for (const SweepCell& c : result.cells)
    out << c.kind << ',' << c.alpha << ',' << c.mean_accuracy << ','
        << c.std_accuracy << ',' << c.trials << '\n';
}

}  // namespace protolab
