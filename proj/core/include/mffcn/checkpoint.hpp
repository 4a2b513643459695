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

#ifndef MFFCN_CHECKPOINT_HPP_
#define MFFCN_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>

#include "mffcn/model.hpp"

// Checkpoint layout (little-endian):
//   "MFFC" | u8 version | u32 record count |
//   count x (u16 name length | UTF-8 name | MTEN blob)
// Records are every trainable parameter in registration order, then the
// batch-norm running statistics (<prefix>.running_mean / .running_var), then
// two metadata records, meta.strategy and meta.width_divisor, each a
// one-element tensor.

namespace mffcn {

inline constexpr unsigned char kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const MffcnModel<float>& model);
MffcnModel<float> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path,
                     const MffcnModel<float>& model);
MffcnModel<float> load_checkpoint(const std::filesystem::path& path);

// True when both models have the same topology and bit-identical
// parameters and running statistics.
bool identical_models(const MffcnModel<float>& a, const MffcnModel<float>& b);

}  // namespace mffcn

#endif  // MFFCN_CHECKPOINT_HPP_
