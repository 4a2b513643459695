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

#ifndef MFFCN_GRADCHECK_HPP_
#define MFFCN_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mffcn/tensor.hpp"

namespace mffcn {

// Central-difference estimate of d f / d x for every element of x:
//   (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
// f must be deterministic; it is evaluated twice at x up front and a
// mismatch raises NumericError.
Tensor64 finite_difference_gradient(
    const std::function<double(const Tensor64&)>& f, const Tensor64& x,
    double eps = 1e-3);

// Same estimate for selected entries of a buffer that f reads implicitly
// (a model parameter, for instance). Each entry is perturbed in place and
// restored bit-exactly afterwards.
std::vector<double> central_differences(const std::function<double()>& f,
                                        std::span<double> values,
                                        std::span<const std::size_t> indices,
                                        double eps = 1e-3);

// Central difference for one entry of a piecewise-smooth function. Step
// sizes descend from eps_max to eps_min by factors of sqrt(10); the first
// three consecutive estimates that agree pairwise to within `agreement`
// (relative, same denominator as relative_error) are taken as free of any
// ReLU / max-pool switch inside the stencil and the middle one is returned.
// `smooth` is false when no such triple exists.
struct RefinedDifference {
  double value = 0.0;
  double eps = 0.0;
  bool smooth = false;
};
RefinedDifference refined_central_difference(const std::function<double()>& f,
                                             std::span<double> values,
                                             std::size_t index, double eps_max,
                                             double eps_min, double agreement);

// |a - b| / max(|a|, |b|, 1e-6)
double relative_error(double a, double b);

// Largest relative_error over paired entries.
double max_relative_error(std::span<const double> analytic,
                          std::span<const double> numeric);

}  // namespace mffcn

#endif  // MFFCN_GRADCHECK_HPP_
