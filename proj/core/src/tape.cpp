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

#include "mffcn/tape.hpp"

#include <atomic>

#include "mffcn/errors.hpp"

namespace mffcn {
namespace {

std::atomic<std::uint64_t> next_generation{1};

template <typename T>
Tape<T>*& active_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

}  // namespace

template <typename T>
Tape<T>::Tape() : generation_(next_generation.fetch_add(1)) {}

template <typename T>
Tape<T>::~Tape() {
  if (active_slot<T>() == this) active_slot<T>() = nullptr;
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<BasicTensor<T>> inputs,
                     std::vector<BasicTensor<T>> outputs,
                     BackwardFn backward) {
  for (auto& out : outputs) {
    auto* node = out.node();
    node->requires_grad = true;
    node->tape = this;
    node->tape_generation = generation_;
  }
  records_.push_back(Record{std::move(op), std::move(inputs),
                            std::move(outputs), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const BasicTensor<T>& loss) {
  if (!loss.defined()) throw TapeError("backward() on an undefined tensor");
  auto* node = loss.node();
  if (node->tape != this || node->tape_generation != generation_) {
    throw TapeError("backward() called on a tensor not produced by this tape");
  }
  if (loss.size() != 1) {
    throw TapeError("backward() needs a scalar loss, got shape " +
                    shape_string(loss.shape()));
  }
  node->grad.assign(1, T(1));
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    bool reached = false;
    for (const auto& out : it->outputs) {
      if (out.has_grad_buffer()) {
        reached = true;
        break;
      }
    }
    if (reached) it->backward();
  }
  clear();
}

template <typename T>
void Tape<T>::clear() {
  records_.clear();
  generation_ = next_generation.fetch_add(1);
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_slot<T>();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(active_slot<T>()) {
  active_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  active_slot<T>() = previous_;
}

template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;

}  // namespace mffcn
