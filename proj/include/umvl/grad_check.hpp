// Copyright 2026 The umvl Authors
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

#ifndef UMVL_GRAD_CHECK_HPP_
#define UMVL_GRAD_CHECK_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "umvl/errors.hpp"

namespace umvl {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares an analytic gradient against central finite differences.
///
/// `value_fn` evaluates the scalar function at a flat parameter vector;
/// `grad_fn` returns its analytic gradient at the same point. The error at
/// coordinate i is |analytic - central| / max(1, |analytic|, |central|),
/// and the maximum over coordinates is returned.
template <typename ValueFn, typename GradFn>
GradCheckResult grad_check(ValueFn&& value_fn, GradFn&& grad_fn,
                           const std::vector<double>& x0, double eps = 1e-5) {
  const std::vector<double> analytic = grad_fn(x0);
  if (analytic.size() != x0.size()) {
    throw DimensionError("grad_check: gradient length " + std::to_string(analytic.size()) +
                         " != parameter length " + std::to_string(x0.size()));
  }
  GradCheckResult result;
  std::vector<double> probe = x0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    probe[i] = x0[i] + eps;
    const double f_plus = value_fn(probe);
    probe[i] = x0[i] - eps;
    const double f_minus = value_fn(probe);
    probe[i] = x0[i];
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw NumericError("grad_check: non-finite value at probe of coordinate " +
                         std::to_string(i));
    }
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.worst_analytic = analytic[i];
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace umvl

#endif  // UMVL_GRAD_CHECK_HPP_
