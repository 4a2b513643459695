/* Copyright 2026 The MFFCN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mffcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

void check_deterministic(const std::function<double()>& f) {
  const double first = f();
  const double second = f();
  if (!(first == second)) {
    throw NumericError(
        "finite_difference_gradient: function is not deterministic");
  }
}

}  // namespace

std::vector<double> central_differences(const std::function<double()>& f,
                                        std::span<double> values,
                                        std::span<const std::size_t> indices,
                                        double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite differences need eps > 0");
  check_deterministic(f);
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= values.size()) {
      throw ShapeError("central_differences: index out of range");
    }
    const double saved = values[i];
    values[i] = saved + eps;
    const double plus = f();
    values[i] = saved - eps;
    const double minus = f();
    values[i] = saved;
    out.push_back((plus - minus) / (2.0 * eps));
  }
  return out;
}

RefinedDifference refined_central_difference(const std::function<double()>& f,
                                             std::span<double> values,
                                             std::size_t index, double eps_max,
                                             double eps_min, double agreement) {
  if (!(eps_max > 0.0) || !(eps_min > 0.0) || eps_min > eps_max) {
    throw ConfigError("refined differences need 0 < eps_min <= eps_max");
  }
  if (index >= values.size()) {
    throw ShapeError("refined_central_difference: index out of range");
  }
  const double saved = values[index];
  auto central = [&](double eps) {
    values[index] = saved + eps;
    const double plus = f();
    values[index] = saved - eps;
    const double minus = f();
    values[index] = saved;
    return (plus - minus) / (2.0 * eps);
  };
  // Step ladder eps_max, eps_max / sqrt(10), ... down to eps_min. An entry
  // is smooth at the first three consecutive steps whose estimates agree
  // pairwise; the middle one is reported.
  const double ratio = std::sqrt(10.0);
  std::vector<double> steps;
  for (double eps = eps_max; eps >= eps_min * (1.0 - 1e-9); eps /= ratio) {
    steps.push_back(eps);
  }
  RefinedDifference out;
  std::vector<double> est;
  for (double eps : steps) {
    est.push_back(central(eps));
    out.value = est.back();
    out.eps = eps;
    const std::size_t n = est.size();
    if (n >= 3 && relative_error(est[n - 3], est[n - 2]) <= agreement &&
        relative_error(est[n - 2], est[n - 1]) <= agreement &&
        relative_error(est[n - 3], est[n - 1]) <= agreement) {
      out.value = est[n - 2];
      out.eps = steps[n - 2];
      out.smooth = true;
      break;
    }
  }
  return out;
}

Tensor64 finite_difference_gradient(
    const std::function<double(const Tensor64&)>& f, const Tensor64& x,
    double eps) {
  Tensor64 probe = x.clone();
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto grads = central_differences([&] { return f(probe); },
                                   probe.mutable_data(), all, eps);
  return Tensor64(x.shape(), std::move(grads));
}

double relative_error(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return INFINITY;
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

double max_relative_error(std::span<const double> analytic,
                          std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("max_relative_error: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace mffcn
