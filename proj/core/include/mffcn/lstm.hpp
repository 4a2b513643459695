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

#ifndef MFFCN_LSTM_HPP_
#define MFFCN_LSTM_HPP_

#include <cstddef>

#include "mffcn/tensor.hpp"

namespace mffcn {

// One LSTM layer. Gate blocks are stacked in the order input, forget, cell,
// output: input_weights [4H,F], recurrent_weights [4H,H], bias [4H].
template <typename T>
struct LstmWeights {
  BasicTensor<T> input_weights;
  BasicTensor<T> recurrent_weights;
  BasicTensor<T> bias;

  std::size_t hidden_size() const { return recurrent_weights.dim(1); }
  std::size_t input_size() const { return input_weights.dim(1); }
};

// Runs the layer over seq [T,F] (or [B,T,F]) from initial states h0, c0 of
// shape [H] (or [B,H]) and returns every hidden state, [T,H] (or [B,T,H]).
// Differentiable in all arguments through time.
template <typename T>
BasicTensor<T> lstm_forward(const BasicTensor<T>& seq,
                            const LstmWeights<T>& weights,
                            const BasicTensor<T>& h0,
                            const BasicTensor<T>& c0);

}  // namespace mffcn

#endif  // MFFCN_LSTM_HPP_
