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

#ifndef MFFCN_OPS_HPP_
#define MFFCN_OPS_HPP_

#include <cstddef>
#include <span>
#include <utility>

#include "mffcn/tensor.hpp"

// Differentiable kernels. Every op accepts an optional leading batch axis
// where noted: [C,H,W] or [B,C,H,W] for feature maps, [C] or [B,C] for
// vectors. Each op records itself on the active tape (see tape.hpp) when an
// input requires a gradient, rejects non-finite inputs, and never writes to
// its inputs. batch_norm is the single exception: it updates its running
// statistics in train mode.

namespace mffcn {

// The only padding scheme: output extent = ceil(input / stride); the total
// pad is split evenly with the odd element on the bottom/right.
enum class PaddingMode { kSameCeil };

struct ConvSpec {
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  PaddingMode padding = PaddingMode::kSameCeil;
};

struct Extent2 {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

std::size_t same_ceil_extent(std::size_t input, std::size_t stride);
Extent2 conv_output_extent(Extent2 input, const ConvSpec& spec);

enum class Mode { kTrain, kEval };

enum class ActivationKind { kLeakyRelu, kRelu, kSigmoid, kTanh };

inline constexpr double kLeakyReluSlope = 0.2;
inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormState {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;

  static BatchNormState fresh(std::size_t channels) {
    return {BasicTensor<T>::zeros({channels}),
            BasicTensor<T>::filled({channels}, T(1))};
  }
};

// Cross-correlation. weights: [C_out, C_in, kh, kw], bias: [C_out].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input,
                      const BasicTensor<T>& weights,
                      const BasicTensor<T>& bias, const ConvSpec& spec);

// Adjoint of conv2d with the same spec. weights: [C_in, C_out, kh, kw] where
// C_in is this op's input channel count. `target` is the spatial extent whose
// same-ceil forward trace produced the input extent; anything else is a
// ShapeError.
template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& input,
                                const BasicTensor<T>& weights,
                                const BasicTensor<T>& bias,
                                const ConvSpec& spec, Extent2 target);

// Non-overlapping max pooling (window == stride) with -inf same-ceil padding.
// Backward routes to the first maximal element of each window.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_h,
                         std::size_t window_w);

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input,
                          const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BatchNormState<T>& state,
                          Mode mode);

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, ActivationKind kind);

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x) {
  return activation(x, ActivationKind::kLeakyRelu);
}
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return activation(x, ActivationKind::kRelu);
}
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return activation(x, ActivationKind::kSigmoid);
}

// Per-index two-way softmax: (e^a, e^b) / (e^a + e^b).
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> softmax_pair(
    const BasicTensor<T>& a, const BasicTensor<T>& b);

// input [C] or [B,C]; weights [C_out, C]; bias [C_out].
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input,
                               const BasicTensor<T>& weights,
                               const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> inputs);

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& input, std::size_t begin,
                              std::size_t count);

// x: [C,H,W] with w: [C], or [B,C,H,W] with w: [B,C].
template <typename T>
BasicTensor<T> scale_channels(const BasicTensor<T>& x,
                              const BasicTensor<T>& w);

template <typename T>
BasicTensor<T> elementwise_mul(const BasicTensor<T>& x,
                               const BasicTensor<T>& y);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& x, const BasicTensor<T>& y);

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& x, const BasicTensor<T>& y);

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& pred,
                        const BasicTensor<T>& target);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// [M,N] -> [N,M] or [B,M,N] -> [B,N,M].
template <typename T>
BasicTensor<T> swap_last_axes(const BasicTensor<T>& x);

}  // namespace mffcn

#endif  // MFFCN_OPS_HPP_
