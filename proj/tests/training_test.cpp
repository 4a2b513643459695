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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mffcn/checkpoint.hpp"
#include "mffcn/errors.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/synth.hpp"
#include "mffcn/tape.hpp"
#include "mffcn/training.hpp"

namespace mffcn {
namespace {

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Tensor64 w({4}, {1.0, -2.0, 0.5, 3.0});
  w.set_requires_grad(true);
  const std::vector<double> g = {0.3, -4.0, 1e-3, 0.0};
  std::copy(g.begin(), g.end(), w.mutable_grad().begin());
  std::vector<NamedParameter<double>> params = {{"w", w}};
  AdamState state = AdamState::for_parameters(params);
  adam_step(params, state, 0.01);
  const double start[] = {1.0, -2.0, 0.5, 3.0};
  for (std::size_t i = 0; i < 4; ++i) {
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    const double want = start[i] - 0.01 * g[i] / (std::fabs(g[i]) + 1e-8);
    EXPECT_NEAR(w.at(i), want, 1e-15);
  }
  EXPECT_EQ(w.at(3), 3.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesScalarRecurrenceOverSeveralSteps) {
  Tensor64 w({1}, {0.0});
  w.set_requires_grad(true);
  std::vector<NamedParameter<double>> params = {{"w", w}};
  AdamState state = AdamState::for_parameters(params);
  double x = 0.0, m = 0.0, v = 0.0;
  const double grads[] = {1.0, -0.5, 2.0, 0.25};
  for (int t = 1; t <= 4; ++t) {
    w.mutable_grad()[0] = grads[t - 1];
    adam_step(params, state, 0.1);
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    x -= 0.1 * (m / (1 - std::pow(0.9, t))) /
         (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(w.at(0), x, 1e-14);
  }
}

TEST(Adam, RequiresGradientBuffers) {
  Tensor64 w({2}, {1.0, 2.0});
  std::vector<NamedParameter<double>> params = {{"w", w}};
  AdamState state = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(params, state, 0.1), TapeError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.snr_low_db = 5.0;
  c.snr_high_db = -5.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.width_divisor = 5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Batch, StacksItemsInIndexOrder) {
  const auto items = synth_dataset(1, 3);
  const std::size_t idx[] = {2, 0};
  const Batch b = make_batch(items, idx);
  EXPECT_EQ(b.noisy.shape(), (Shape{2, 1, 80, 20}));
  EXPECT_EQ(b.video.shape(), (Shape{2, 5, 80, 80}));
  EXPECT_EQ(b.clean.shape(), (Shape{2, 1, 80, 20}));
  for (std::size_t i = 0; i < 1600; ++i) {
    EXPECT_EQ(b.noisy.at(i), items[2].noisy.values.at(i));
    EXPECT_EQ(b.clean.at(1600 + i), items[0].clean.values.at(i));
  }
  EXPECT_THROW(make_batch(items, std::vector<std::size_t>{}), ConfigError);
  EXPECT_THROW(make_batch(items, std::vector<std::size_t>{3}), ConfigError);
}

TEST(Synth, DatasetIsDeterministicAndShaped) {
  const auto a = synth_dataset(7, 4), b = synth_dataset(7, 4), c = synth_dataset(8, 4);
  ASSERT_EQ(a.size(), 4u);
  bool differs = false;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].video.frames.shape(), (Shape{5, 80, 80}));
    EXPECT_TRUE(std::equal(a[i].noisy.values.data().begin(), a[i].noisy.values.data().end(),
                           b[i].noisy.values.data().begin()));
    EXPECT_EQ(a[i].snr_db, b[i].snr_db);
    differs |= !std::equal(a[i].noisy.values.data().begin(), a[i].noisy.values.data().end(),
                           c[i].noisy.values.data().begin());
    for (float p : a[i].video.frames.data()) {
      EXPECT_GE(p, 0.0f);
      EXPECT_LE(p, 1.0f);
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Synth, SnrDrawsAreUniformOverTheRange) {
  const SynthConfig cfg;
  double sum = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double s = synth_item_snr(3, i, cfg);
    EXPECT_GE(s, -10.0);
    EXPECT_LE(s, 10.0);
    sum += s;
  }
  EXPECT_NEAR(sum / 1000.0, 0.0, 0.5);
  const auto items = synth_dataset(3, 5, cfg);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(items[i].snr_db, synth_item_snr(3, i, cfg));
}

TEST(Train, ZeroStepsReturnsInitialisedModel) {
  TrainConfig c;
  c.steps = 0;
  c.width_divisor = 64;
  c.seed = 13;
  const auto data = synth_dataset(0, 2);
  const TrainResult r = train(c, data);
  EXPECT_TRUE(r.losses.empty());
  EXPECT_TRUE(identical_models(r.model, MffcnModel<float>({c.strategy, 64}, 13)));
  EXPECT_THROW(train(c, std::vector<SegmentTriple>{}), ConfigError);
}

TEST(Train, IdenticalConfigIsBitReproducible) {
  TrainConfig c;
  c.steps = 4;
  c.width_divisor = 64;
  c.batch_size = 2;
  c.strategy = FusionStrategy::kIntermediateDecoder;
  const auto data = synth_dataset(0, 3);
  std::vector<double> seen;
  const TrainResult a = train(c, data, [&](std::size_t, double l) { seen.push_back(l); });
  const TrainResult b = train(c, data);
  ASSERT_EQ(a.losses.size(), 4u);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(seen, a.losses);
  EXPECT_TRUE(identical_models(a.model, b.model));
  EXPECT_FALSE(identical_models(a.model, MffcnModel<float>({c.strategy, 64}, 0)));
}

double batch_loss(MffcnModel<float>& m, const Batch& b) {
  return mse_loss(m.forward(b.noisy, b.video, Mode::kTrain), b.clean).item();
}

TEST(Train, SmallStepsDescendOnAFixedBatch) {
  const auto data = synth_dataset(2, 2);
  const std::size_t idx[] = {0, 1};
  const Batch batch = make_batch(data, idx);
  MffcnModel<float> m({FusionStrategy::kMultiLayer, 16}, 1);
  AdamState adam = AdamState::for_parameters(m.parameters());
  int descended = 0;
  for (int step = 0; step < 50; ++step) {
    m.zero_grad();
    Tape<float> tape;
    double before = 0.0;
    {
      TapeScope<float> scope(tape);
      const Tensor loss = mse_loss(m.forward(batch.noisy, batch.video, Mode::kTrain), batch.clean);
      before = loss.item();
      tape.backward(loss);
    }
    adam_step(m.parameters(), adam, 1e-4);
    if (batch_loss(m, batch) < before) ++descended;
  }
  EXPECT_GE(descended, 48);
}

}  // namespace
}  // namespace mffcn
