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

#ifndef MFFCN_GRADCHECK_SUITE_HPP_
#define MFFCN_GRADCHECK_SUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mffcn/model.hpp"

// Reverse-mode vs central-difference comparison for every differentiable
// kernel and for the whole network at reduced width. Runs in double
// precision.

namespace mffcn {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 5;           // seed, seed + 1, ...
  std::size_t width_divisor = 16;  // end-to-end model width
  double tolerance = 1e-4;
  double op_eps = 1e-6;
  // End-to-end entries use refined differences: eps starts at model_eps_max
  // and shrinks to model_eps_min while a ReLU / max-pool switch sits inside
  // the stencil. Entries with no consistent step are counted as skipped; more
  // than max_skipped_fraction of them fails the check.
  double model_eps_max = 1e-3;
  double model_eps_min = 1e-6;
  double kink_agreement = 5e-5;
  double max_skipped_fraction = 0.05;
  std::size_t entries_per_tensor = 2;  // sampled per parameter, end-to-end
  bool end_to_end = true;
  // Strategies for the end-to-end check. The first runs on every seed, the
  // rest on the first seed only.
  std::vector<FusionStrategy> strategies = {
      FusionStrategy::kMultiLayer, FusionStrategy::kEarlyFusion,
      FusionStrategy::kLateFusion, FusionStrategy::kIntermediateBottleneck,
      FusionStrategy::kIntermediateDecoder};
};

struct GradcheckResult {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t entries = 0;  // gradient entries compared
  std::size_t runs = 0;     // seeds
  std::size_t skipped = 0;  // entries at a non-differentiable point
  bool passed = false;
  std::string worst_entry;  // where the max occurred
};

struct GradcheckReport {
  double tolerance = 0.0;
  std::vector<GradcheckResult> results;

  bool all_passed() const;
  const GradcheckResult& worst() const;
};

using GradcheckProgress = std::function<void(const GradcheckResult&)>;

GradcheckReport run_gradcheck_suite(const GradcheckOptions& options,
                                    const GradcheckProgress& progress = {});

// Aligned table: op, max rel-err, entries, skipped, seeds, PASS/FAIL.
void print_gradcheck_table(std::ostream& out, const GradcheckReport& report);

}  // namespace mffcn

#endif  // MFFCN_GRADCHECK_SUITE_HPP_
