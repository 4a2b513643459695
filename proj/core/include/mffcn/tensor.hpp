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

#ifndef MFFCN_TENSOR_HPP_
#define MFFCN_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mffcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorAccess;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily; empty means "all zeros"
  bool requires_grad = false;
  // Set when the tensor is the output of a taped operation.
  const void* tape = nullptr;
  std::uint64_t tape_generation = 0;
};

}  // namespace detail

// Dense row-major N-d array. Copies are cheap handles that share storage, so a
// tensor captured by the tape and the caller's copy refer to the same values.
// Operations never modify their inputs; only parameter owners (optimizer,
// initializer, checkpoint loader) write through mutable_data().
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  // Throws ShapeError on zero extents or a size mismatch, NumericError on
  // non-finite values.
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor zeros(Shape shape);
  static BasicTensor filled(Shape shape, T value);
  static BasicTensor scalar(T value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const T> data() const;
  std::span<T> mutable_data();
  T item() const;
  T at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  // Leaf tensors only; allocates a zeroed gradient buffer when enabled.
  BasicTensor& set_requires_grad(bool on);
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();
  bool has_grad_buffer() const;

  // Fresh leaf holding a copy of the values (no gradient, no tape link).
  BasicTensor clone() const;
  bool same_storage(const BasicTensor& other) const {
    return node_ == other.node_;
  }

  detail::TensorNode<T>* node() const { return node_.get(); }

 private:
  friend struct detail::TensorAccess<T>;
  explicit BasicTensor(std::shared_ptr<detail::TensorNode<T>> node)
      : node_(std::move(node)) {}

  std::shared_ptr<detail::TensorNode<T>> node_;
};

namespace detail {

// Library-internal construction and node access for the op kernels.
template <typename T>
struct TensorAccess {
  static BasicTensor<T> make_unchecked(Shape shape, std::vector<T> values) {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    return BasicTensor<T>(std::move(node));
  }
  static std::shared_ptr<TensorNode<T>> node(const BasicTensor<T>& t) {
    return t.node_;
  }
};

}  // namespace detail

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return BasicTensor<To>(x.shape(), std::move(out));
}

bool all_finite(std::span<const float> values);
bool all_finite(std::span<const double> values);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace mffcn

#endif  // MFFCN_TENSOR_HPP_
