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

#include "mffcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mffcn/errors.hpp"

namespace mffcn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

template <typename T>
bool finite_span(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(),
                     [](T v) { return std::isfinite(v); });
}

}  // namespace

bool all_finite(std::span<const float> values) { return finite_span(values); }
bool all_finite(std::span<const double> values) { return finite_span(values); }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) {
  if (shape.empty()) throw ShapeError("tensor rank must be at least 1");
  for (std::size_t axis = 0; axis < shape.size(); ++axis) {
    if (shape[axis] == 0) {
      throw ShapeError("tensor axis " + std::to_string(axis) +
                       " has zero extent in " + shape_string(shape));
    }
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  if (!finite_span(std::span<const T>(values))) {
    throw NumericError("tensor values must be finite");
  }
  node_ = std::make_shared<detail::TensorNode<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape) {
  std::size_t n = shape_size(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, T(0)));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::filled(Shape shape, T value) {
  std::size_t n = shape_size(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return BasicTensor(Shape{1}, std::vector<T>{value});
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  if (!node_) throw ShapeError("use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_string(s));
  }
  return s[axis];
}

template <typename T>
std::size_t BasicTensor<T>::size() const {
  return node_ ? node_->data.size() : 0;
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  if (!node_) throw ShapeError("use of an undefined tensor");
  return node_->data;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (!node_) throw ShapeError("use of an undefined tensor");
  return node_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " +
                     shape_string(shape()));
  }
  return node_->data[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!node_) throw ShapeError("use of an undefined tensor");
  if (node_->tape != nullptr) {
    throw TapeError("requires_grad can only be changed on leaf tensors");
  }
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->data.size(), T(0));
  } else {
    node_->grad.clear();
  }
  return *this;
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  if (!requires_grad()) throw TapeError("tensor does not require grad");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (!requires_grad()) throw TapeError("tensor does not require grad");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (requires_grad()) node_->grad.assign(node_->data.size(), T(0));
}

template <typename T>
bool BasicTensor<T>::has_grad_buffer() const {
  return node_ && !node_->grad.empty();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return BasicTensor(shape(), node_->data);
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace mffcn
