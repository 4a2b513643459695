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

#ifndef MFFCN_TRAINING_HPP_
#define MFFCN_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mffcn/dsp.hpp"
#include "mffcn/model.hpp"

namespace mffcn {

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 8;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double snr_low_db = -10.0;
  double snr_high_db = 10.0;
  FusionStrategy strategy = FusionStrategy::kMultiLayer;
  std::size_t width_divisor = 1;

  // Throws ConfigError on lr <= 0, batch 0, a reversed SNR range or a bad
  // width divisor.
  void validate() const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;   // one per parameter
  std::vector<std::vector<double>> second_moment;

  template <typename T>
  static AdamState for_parameters(
      const std::vector<NamedParameter<T>>& params);
};

// One bias-corrected Adam update of every parameter from its gradient
// buffer. Moments and the update are accumulated in double. Throws TapeError
// naming the first parameter without a gradient.
template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params,
               AdamState& state, double learning_rate);

// Stacks items[indices] into network inputs/targets.
struct Batch {
  Tensor noisy;  // [B,1,80,20]
  Tensor video;  // [B,5,80,80]
  Tensor clean;  // [B,1,80,20]
};
Batch make_batch(std::span<const SegmentTriple> items,
                 std::span<const std::size_t> indices);

struct TrainResult {
  std::vector<double> losses;  // loss at step 1..steps, before each update
  MffcnModel<float> model;
};

using StepCallback = std::function<void(std::size_t step, double loss)>;

// Adam + MSE on log-Mel targets with train-mode batch norm. Batches are
// drawn from a seeded shuffle that reshuffles whenever it runs out, so every
// batch has exactly batch_size items. A non-finite loss or parameter raises
// NumericError naming the step and the offending parameter.
TrainResult train(const TrainConfig& config,
                  std::span<const SegmentTriple> data,
                  const StepCallback& on_step = {});

// Mean MSE of the model (eval-mode batch norm) over the items.
double evaluate_loss(MffcnModel<float>& model,
                     std::span<const SegmentTriple> data);

void write_loss_csv(const std::filesystem::path& path,
                    std::span<const double> losses);

// Segment triples as three MTEN files in `dir`: noisy.mten [N,80,20],
// video.mten [N,5,80,80], clean.mten [N,80,20].
std::vector<SegmentTriple> load_triples(const std::filesystem::path& dir);
void save_triples(const std::filesystem::path& dir,
                  std::span<const SegmentTriple> items);

}  // namespace mffcn

#endif  // MFFCN_TRAINING_HPP_
