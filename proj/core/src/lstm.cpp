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

#include "mffcn/lstm.hpp"

#include <cmath>
#include <vector>

#include "op_support.hpp"

namespace mffcn {

using detail::check_axis;
using detail::ConstMatMap;
using detail::grad_of;
using detail::make_output;
using detail::MatMap;
using detail::recording_tape;
using detail::require_finite;

namespace {

template <typename T>
T logistic(T v) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

// Per-step activations kept for backpropagation through time. All buffers are
// [T][B][...] flattened.
template <typename T>
struct LstmCache {
  std::vector<T> gates;   // [T][B][4H] post-activation i, f, g, o
  std::vector<T> cells;   // [T][B][H]
  std::vector<T> tanh_c;  // [T][B][H]
};

}  // namespace

template <typename T>
BasicTensor<T> lstm_forward(const BasicTensor<T>& seq,
                            const LstmWeights<T>& weights,
                            const BasicTensor<T>& h0,
                            const BasicTensor<T>& c0) {
  constexpr const char* op = "lstm_forward";
  require_finite(seq, op, "sequence");
  require_finite(weights.input_weights, op, "input weights");
  require_finite(weights.recurrent_weights, op, "recurrent weights");
  require_finite(weights.bias, op, "bias");
  require_finite(h0, op, "h0");
  require_finite(c0, op, "c0");
  if (seq.rank() != 2 && seq.rank() != 3) {
    throw ShapeError("lstm_forward: sequence must be [T,F] or [B,T,F], got " +
                     shape_string(seq.shape()));
  }
  const bool batched = seq.rank() == 3;
  const std::size_t batch = batched ? seq.dim(0) : 1;
  const std::size_t steps = seq.dim(batched ? 1 : 0);
  const std::size_t features = seq.dim(batched ? 2 : 1);
  const auto& wih = weights.input_weights;
  const auto& whh = weights.recurrent_weights;
  const auto& bias = weights.bias;
  if (wih.rank() != 2 || whh.rank() != 2 || bias.rank() != 1) {
    throw ShapeError("lstm_forward: weights must be [4H,F], [4H,H], [4H]");
  }
  const std::size_t hidden = whh.dim(1);
  check_axis(op, "recurrent weights", 0, whh.dim(0), 4 * hidden);
  check_axis(op, "input weights", 0, wih.dim(0), 4 * hidden);
  check_axis(op, "input weights", 1, wih.dim(1), features);
  check_axis(op, "bias", 0, bias.dim(0), 4 * hidden);
  const Shape state_shape = batched ? Shape{batch, hidden} : Shape{hidden};
  if (h0.shape() != state_shape || c0.shape() != state_shape) {
    throw ShapeError("lstm_forward: initial states must be " +
                     shape_string(state_shape) + ", got " +
                     shape_string(h0.shape()) + " and " +
                     shape_string(c0.shape()));
  }

  const std::size_t g4 = 4 * hidden;
  // Input is [B][T][F]; gather step t as a [B,F] matrix.
  auto step_input = [&](std::size_t t, std::vector<T>& buf) {
    for (std::size_t b = 0; b < batch; ++b) {
      const T* src = seq.data().data() + (b * steps + t) * features;
      std::copy(src, src + features, buf.begin() + b * features);
    }
  };

  LstmCache<T> cache;
  cache.gates.resize(steps * batch * g4);
  cache.cells.resize(steps * batch * hidden);
  cache.tanh_c.resize(steps * batch * hidden);
  std::vector<T> out(batch * steps * hidden);
  std::vector<T> h(h0.data().begin(), h0.data().end());
  std::vector<T> c(c0.data().begin(), c0.data().end());
  std::vector<T> xt(batch * features);
  ConstMatMap<T> w_in(wih.data().data(), g4, features);
  ConstMatMap<T> w_rec(whh.data().data(), g4, hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    step_input(t, xt);
    T* z_ptr = cache.gates.data() + t * batch * g4;
    MatMap<T> z(z_ptr, batch, g4);
    z.noalias() = ConstMatMap<T>(xt.data(), batch, features) * w_in.transpose();
    z.noalias() += ConstMatMap<T>(h.data(), batch, hidden) * w_rec.transpose();
    for (std::size_t b = 0; b < batch; ++b) {
      T* zb = z_ptr + b * g4;
      for (std::size_t j = 0; j < g4; ++j) zb[j] += bias.data()[j];
      for (std::size_t j = 0; j < hidden; ++j) {
        const T i_g = logistic(zb[j]);
        const T f_g = logistic(zb[hidden + j]);
        const T c_g = static_cast<T>(std::tanh(double(zb[2 * hidden + j])));
        const T o_g = logistic(zb[3 * hidden + j]);
        zb[j] = i_g;
        zb[hidden + j] = f_g;
        zb[2 * hidden + j] = c_g;
        zb[3 * hidden + j] = o_g;
        const T cell = f_g * c[b * hidden + j] + i_g * c_g;
        const T tc = static_cast<T>(std::tanh(double(cell)));
        c[b * hidden + j] = cell;
        h[b * hidden + j] = o_g * tc;
        cache.cells[(t * batch + b) * hidden + j] = cell;
        cache.tanh_c[(t * batch + b) * hidden + j] = tc;
        out[(b * steps + t) * hidden + j] = o_g * tc;
      }
    }
  }
  auto result = make_output(
      op, batched ? Shape{batch, steps, hidden} : Shape{steps, hidden},
      std::move(out));

  if (auto* tape = recording_tape<T>({&seq, &wih, &whh, &bias, &h0, &c0})) {
    tape->record(
        op, {seq, wih, whh, bias, h0, c0}, {result},
        [seq, wih, whh, bias, h0, c0, result, cache = std::move(cache), batch,
         steps, features, hidden, g4]() {
          auto dy = grad_of(result);
          ConstMatMap<T> w_in(wih.data().data(), g4, features);
          ConstMatMap<T> w_rec(whh.data().data(), g4, hidden);
          std::vector<T> dh_next(batch * hidden, T(0));
          std::vector<T> dc_next(batch * hidden, T(0));
          std::vector<T> dz(batch * g4);
          std::vector<T> xt(batch * features);
          std::vector<T> h_prev(batch * hidden);
          std::vector<T> dx(batch * features);
          for (std::size_t step = steps; step-- > 0;) {
            const T* gates = cache.gates.data() + step * batch * g4;
            for (std::size_t b = 0; b < batch; ++b) {
              for (std::size_t j = 0; j < hidden; ++j) {
                const std::size_t bj = b * hidden + j;
                const std::size_t cj = (step * batch + b) * hidden + j;
                const T i_g = gates[b * g4 + j];
                const T f_g = gates[b * g4 + hidden + j];
                const T c_g = gates[b * g4 + 2 * hidden + j];
                const T o_g = gates[b * g4 + 3 * hidden + j];
                const T tc = cache.tanh_c[cj];
                const T c_prev =
                    step > 0 ? cache.cells[cj - batch * hidden] : c0.at(bj);
                const T dh = dy[(b * steps + step) * hidden + j] + dh_next[bj];
                const T d_o = dh * tc;
                const T dc = dh * o_g * (T(1) - tc * tc) + dc_next[bj];
                dc_next[bj] = dc * f_g;
                T* dzb = dz.data() + b * g4;
                dzb[j] = dc * c_g * i_g * (T(1) - i_g);
                dzb[hidden + j] = dc * c_prev * f_g * (T(1) - f_g);
                dzb[2 * hidden + j] = dc * i_g * (T(1) - c_g * c_g);
                dzb[3 * hidden + j] = d_o * o_g * (T(1) - o_g);
              }
            }
            for (std::size_t b = 0; b < batch; ++b) {
              const T* src = seq.data().data() + (b * steps + step) * features;
              std::copy(src, src + features, xt.begin() + b * features);
              for (std::size_t j = 0; j < hidden; ++j) {
                const std::size_t prev = ((step - 1) * batch + b) * hidden + j;
                h_prev[b * hidden + j] =
                    step > 0 ? cache.gates[((step - 1) * batch + b) * g4 +
                                           3 * hidden + j] *
                                   cache.tanh_c[prev]
                             : h0.at(b * hidden + j);
              }
            }
            ConstMatMap<T> dzm(dz.data(), batch, g4);
            if (wih.requires_grad()) {
              MatMap<T> dw(grad_of(wih).data(), g4, features);
              dw.noalias() +=
                  dzm.transpose() * ConstMatMap<T>(xt.data(), batch, features);
            }
            if (whh.requires_grad()) {
              MatMap<T> dw(grad_of(whh).data(), g4, hidden);
              dw.noalias() +=
                  dzm.transpose() * ConstMatMap<T>(h_prev.data(), batch, hidden);
            }
            if (bias.requires_grad()) {
              auto db = grad_of(bias);
              for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t j = 0; j < g4; ++j) db[j] += dz[b * g4 + j];
              }
            }
            if (seq.requires_grad()) {
              MatMap<T> dxm(dx.data(), batch, features);
              dxm.noalias() = dzm * w_in;
              auto ds = grad_of(seq);
              for (std::size_t b = 0; b < batch; ++b) {
                T* dst = ds.data() + (b * steps + step) * features;
                for (std::size_t f = 0; f < features; ++f) {
                  dst[f] += dx[b * features + f];
                }
              }
            }
            MatMap<T> dhm(dh_next.data(), batch, hidden);
            dhm.noalias() = dzm * w_rec;
          }
          if (h0.requires_grad()) {
            auto d = grad_of(h0);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dh_next[i];
          }
          if (c0.requires_grad()) {
            auto d = grad_of(c0);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dc_next[i];
          }
        });
  }
  return result;
}

template BasicTensor<float> lstm_forward(const BasicTensor<float>&,
                                         const LstmWeights<float>&,
                                         const BasicTensor<float>&,
                                         const BasicTensor<float>&);
template BasicTensor<double> lstm_forward(const BasicTensor<double>&,
                                          const LstmWeights<double>&,
                                          const BasicTensor<double>&,
                                          const BasicTensor<double>&);

}  // namespace mffcn
