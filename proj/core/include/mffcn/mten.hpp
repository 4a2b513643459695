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

#ifndef MFFCN_MTEN_HPP_
#define MFFCN_MTEN_HPP_

#include <filesystem>
#include <iosfwd>

#include "mffcn/tensor.hpp"

// MTEN tensor container:
//   "MTEN" | u8 version (1) | u8 rank | rank x u32 LE dims | f32 LE data
// Data is row-major.

namespace mffcn {

inline constexpr unsigned char kMtenVersion = 1;

void write_mten(std::ostream& out, const Tensor& tensor);
// Throws FormatError on a bad magic, version, truncated payload or
// non-finite value.
Tensor read_mten(std::istream& in);

void save_mten(const std::filesystem::path& path, const Tensor& tensor);
Tensor load_mten(const std::filesystem::path& path);

}  // namespace mffcn

#endif  // MFFCN_MTEN_HPP_
