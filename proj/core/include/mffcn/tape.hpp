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

#ifndef MFFCN_TAPE_HPP_
#define MFFCN_TAPE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mffcn/tensor.hpp"

namespace mffcn {

// Ordered record of differentiable operations executed while the tape is
// active on the current thread. A tape belongs to one thread; activate it with
// a TapeScope. Operations record themselves only when at least one input
// requires a gradient.
template <typename T>
class Tape {
 public:
  // Reads the gradients of the record's outputs and accumulates into the
  // gradients of its inputs.
  using BackwardFn = std::function<void()>;

  struct Record {
    std::string op;
    std::vector<BasicTensor<T>> inputs;
    std::vector<BasicTensor<T>> outputs;
    BackwardFn backward;
  };

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }

  // Marks every output as a taped, grad-requiring tensor and appends the
  // record.
  void record(std::string op, std::vector<BasicTensor<T>> inputs,
              std::vector<BasicTensor<T>> outputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every record exactly once in reverse
  // execution order, then releases the records. Leaf gradients accumulate
  // across calls; clear them with zero_grad().
  void backward(const BasicTensor<T>& loss);

  // Drops all records without running them.
  void clear();

  // The tape activated on this thread, or nullptr.
  static Tape* active();

 private:
  template <typename>
  friend class TapeScope;

  std::vector<Record> records_;
  std::uint64_t generation_;
};

// RAII activation of a tape on the current thread. Scopes nest.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  ~TapeScope();

 private:
  Tape<T>* previous_;
};

// Convenience wrapper for backward() on the tape that produced `loss`.
template <typename T>
void backward(Tape<T>& tape, const BasicTensor<T>& loss) {
  tape.backward(loss);
}

extern template class Tape<float>;
extern template class Tape<double>;
extern template class TapeScope<float>;
extern template class TapeScope<double>;

}  // namespace mffcn

#endif  // MFFCN_TAPE_HPP_
