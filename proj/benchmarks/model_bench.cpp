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

#include <benchmark/benchmark.h>

#include "mffcn/model.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/tape.hpp"
#include "mffcn/training.hpp"

namespace mffcn {
namespace {

Batch sample_batch(std::size_t n) {
  static const std::vector<SegmentTriple> items = synth_dataset(0, 8);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i % items.size();
  return make_batch(items, idx);
}

// range(0): width divisor, range(1): strategy index.
void BM_ModelForward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const FusionStrategy s = kAllStrategies[static_cast<std::size_t>(state.range(1))];
  MffcnModel<float> model({s, d}, 0);
  const Batch batch = sample_batch(4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(batch.noisy, batch.video, Mode::kEval));
  }
  state.SetLabel(std::string(strategy_name(s)));
}
BENCHMARK(BM_ModelForward)
    ->ArgsProduct({{8, 16}, {0, 1, 2, 3, 4}})
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  MffcnModel<float> model({FusionStrategy::kMultiLayer, d}, 0);
  AdamState adam = AdamState::for_parameters(model.parameters());
  const Batch batch = sample_batch(4);
  for (auto _ : state) {
    model.zero_grad();
    Tape<float> tape;
    {
      TapeScope<float> scope(tape);
      tape.backward(mse_loss(model.forward(batch.noisy, batch.video, Mode::kTrain),
                             batch.clean));
    }
    adam_step(model.parameters(), adam, 2e-4);
  }
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mffcn
