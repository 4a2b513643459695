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

// Internal helpers shared by the op kernels.
#ifndef MFFCN_SRC_OP_SUPPORT_HPP_
#define MFFCN_SRC_OP_SUPPORT_HPP_

#include <Eigen/Core>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mffcn/errors.hpp"
#include "mffcn/tape.hpp"
#include "mffcn/tensor.hpp"

namespace mffcn::detail {

template <typename T>
using RowMatrix =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <typename T>
void require_finite(const BasicTensor<T>& x, const char* op,
                    const char* what) {
  if (!x.defined()) {
    throw ShapeError(std::string(op) + ": " + what + " is undefined");
  }
  if (!all_finite(x.data())) {
    throw NumericError(std::string(op) + ": " + what +
                       " contains non-finite values");
  }
}

template <typename T>
BasicTensor<T> make_output(const char* op, Shape shape, std::vector<T> values) {
  if (!all_finite(std::span<const T>(values))) {
    throw NumericError(std::string(op) + " produced non-finite values");
  }
  return TensorAccess<T>::make_unchecked(std::move(shape), std::move(values));
}

// Active tape when some input needs a gradient, otherwise nullptr.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const BasicTensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr) return nullptr;
  for (const auto* in : inputs) {
    if (in->defined() && in->requires_grad()) return tape;
  }
  return nullptr;
}

// Gradient buffer of a tensor captured by a backward closure.
template <typename T>
std::span<T> grad_of(const BasicTensor<T>& t) {
  auto* node = t.node();
  if (node->grad.empty()) node->grad.assign(node->data.size(), T(0));
  return node->grad;
}

inline void check_axis(const char* op, const char* what, std::size_t axis,
                       std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(op) + ": " + what + " axis " +
                     std::to_string(axis) + " has extent " +
                     std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}

// [C,H,W] or [B,C,H,W] viewed as batched.
struct Nchw {
  std::size_t batch, channels, height, width;
  bool batched;
  std::size_t plane() const { return height * width; }
  std::size_t item() const { return channels * height * width; }
  Shape shape_with(std::size_t c, std::size_t h, std::size_t w) const {
    return batched ? Shape{batch, c, h, w} : Shape{c, h, w};
  }
};

template <typename T>
Nchw as_nchw(const BasicTensor<T>& x, const char* op) {
  const Shape& s = x.shape();
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw ShapeError(std::string(op) + ": expected a [C,H,W] or [B,C,H,W] " +
                   "tensor, got " + shape_string(s));
}

}  // namespace mffcn::detail

#endif  // MFFCN_SRC_OP_SUPPORT_HPP_
