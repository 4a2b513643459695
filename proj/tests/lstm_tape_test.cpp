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
#include <random>
#include <vector>

#include "mffcn/errors.hpp"
#include "mffcn/gradcheck.hpp"
#include "mffcn/lstm.hpp"
#include "mffcn/ops.hpp"
#include "mffcn/tape.hpp"

namespace mffcn {
namespace {

Tensor64 random_tensor(Shape shape, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = u(rng);
  return Tensor64(std::move(shape), std::move(v));
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Lstm, ZeroWeightsGiveZeroStates) {
  LstmWeights<double> w{Tensor64::zeros({16, 3}), Tensor64::zeros({16, 4}),
                        Tensor64::zeros({16})};
  std::mt19937_64 rng(1);
  Tensor64 h = lstm_forward(random_tensor({5, 3}, rng), w, Tensor64::zeros({4}),
                            Tensor64::zeros({4}));
  ASSERT_EQ(h.shape(), (Shape{5, 4}));
  for (double v : h.data()) EXPECT_EQ(v, 0.0);
}

// Gate order input, forget, cell, output.
TEST(Lstm, SingleStepMatchesCellEquations) {
  std::mt19937_64 rng(2);
  const std::size_t F = 3, H = 2;
  LstmWeights<double> w{random_tensor({4 * H, F}, rng),
                        random_tensor({4 * H, H}, rng),
                        random_tensor({4 * H}, rng)};
  Tensor64 x = random_tensor({1, F}, rng);
  Tensor64 h0 = random_tensor({H}, rng), c0 = random_tensor({H}, rng);
  Tensor64 h = lstm_forward(x, w, h0, c0);
  for (std::size_t j = 0; j < H; ++j) {
    double z[4];
    for (std::size_t g = 0; g < 4; ++g) {
      const std::size_t row = g * H + j;
      double acc = w.bias.data()[row];
      for (std::size_t f = 0; f < F; ++f)
        acc += w.input_weights.data()[row * F + f] * x.data()[f];
      for (std::size_t k = 0; k < H; ++k)
        acc += w.recurrent_weights.data()[row * H + k] * h0.data()[k];
      z[g] = acc;
    }
    const double c = sigmoid_ref(z[1]) * c0.data()[j] +
                     sigmoid_ref(z[0]) * std::tanh(z[2]);
    EXPECT_NEAR(h.data()[j], sigmoid_ref(z[3]) * std::tanh(c), 1e-14);
  }
}

TEST(Lstm, BackpropThroughTimeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const std::size_t T = 3, F = 4, H = 4;
    Tensor64 x = random_tensor({T, F}, rng, 1.0);
    LstmWeights<double> w{random_tensor({4 * H, F}, rng),
                          random_tensor({4 * H, H}, rng),
                          random_tensor({4 * H}, rng)};
    Tensor64 h0 = random_tensor({H}, rng), c0 = random_tensor({H}, rng);
    Tensor64 proj = random_tensor({T, H}, rng, 1.0);
    std::vector<Tensor64> leaves = {x, w.input_weights, w.recurrent_weights,
                                    w.bias, h0, c0};
    for (Tensor64& t : leaves) t.set_requires_grad(true);
    auto loss = [&] {
      return sum(elementwise_mul(lstm_forward(x, w, h0, c0), proj));
    };
    Tape<double> tape;
    {
      TapeScope<double> scope(tape);
      tape.backward(loss());
    }
    for (Tensor64& t : leaves) {
      std::vector<std::size_t> all(t.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const std::vector<double> fd = central_differences(
          [&] { return loss().item(); }, t.mutable_data(), all, 1e-6);
      EXPECT_LT(max_relative_error(t.grad(), fd), 1e-4) << "seed " << seed;
    }
  }
}

TEST(Lstm, BatchedEqualsPerSequence) {
  std::mt19937_64 rng(3);
  LstmWeights<double> w{random_tensor({8, 3}, rng), random_tensor({8, 2}, rng),
                        random_tensor({8}, rng)};
  Tensor64 seq = random_tensor({2, 4, 3}, rng);
  Tensor64 h = lstm_forward(seq, w, Tensor64::zeros({2, 2}), Tensor64::zeros({2, 2}));
  ASSERT_EQ(h.shape(), (Shape{2, 4, 2}));
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<double> one(seq.data().begin() + b * 12,
                            seq.data().begin() + (b + 1) * 12);
    Tensor64 hb = lstm_forward(Tensor64({4, 3}, one), w, Tensor64::zeros({2}),
                               Tensor64::zeros({2}));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(h.data()[b * 8 + i], hb.data()[i]);
  }
}

TEST(Tape, RecordsOnlyWhenActiveAndRequired) {
  Tensor64 a = Tensor64::filled({2}, 1.0), b = Tensor64::filled({2}, 2.0);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    add(a, b);
    EXPECT_EQ(tape.size(), 0u);
    a.set_requires_grad(true);
    add(a, b);
    EXPECT_EQ(tape.size(), 1u);
  }
  EXPECT_EQ(Tape<double>::active(), nullptr);
  add(a, b);
  EXPECT_EQ(tape.size(), 1u);
}

TEST(Tape, BackwardMisuseRaisesTapeError) {
  Tensor64 a = Tensor64::filled({3}, 1.0);
  a.set_requires_grad(true);
  Tape<double> tape, other;
  Tensor64 y, s;
  {
    TapeScope<double> scope(tape);
    y = elementwise_mul(a, a);
    s = sum(y);
  }
  EXPECT_THROW(tape.backward(y), TapeError);      // not a scalar
  EXPECT_THROW(other.backward(s), TapeError);     // from another tape
  EXPECT_THROW(tape.backward(Tensor64()), TapeError);
}

TEST(Tape, GradientsAccumulateAcrossBackwardCalls) {
  Tensor64 a({2}, {1.0, -3.0});
  a.set_requires_grad(true);
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(sum(a));
  }
  EXPECT_EQ(a.grad()[0], 2.0);
  a.zero_grad();
  EXPECT_EQ(a.grad()[1], 0.0);
}

}  // namespace
}  // namespace mffcn
