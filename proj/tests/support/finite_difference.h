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

#ifndef PROTOLAB_TESTS_FINITE_DIFFERENCE_H_
#define PROTOLAB_TESTS_FINITE_DIFFERENCE_H_

#include <algorithm>
#include <cmath>
#include <functional>

#include "protolab/common.h"

namespace protolab::testing {

// Central differences of f at x, one coordinate at a time.
inline Matrix central_difference(const std::function<double(const Matrix&)>& f,
                                 const Matrix& x, double step) {
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = f(probe);
      probe(i, j) = orig - step;
      const double down = f(probe);
      probe(i, j) = orig;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  return grad;
}

// Largest entrywise |a - b| / max(|a|, |b|, floor). The floor keeps entries
// that are zero up to round-off from dominating the ratio.
inline double max_relative_error(const Matrix& a, const Matrix& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double denom =
          std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

}  // namespace protolab::testing

#endif  // PROTOLAB_TESTS_FINITE_DIFFERENCE_H_
