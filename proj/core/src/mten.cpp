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

#include "mffcn/mten.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "mffcn/errors.hpp"

namespace mffcn {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff),
                                 static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError("MTEN: truncated header");
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_mten(std::ostream& out, const Tensor& tensor) {
  const Shape& shape = tensor.shape();
  if (shape.size() > 255) throw FormatError("MTEN: rank exceeds 255");
  out.write("MTEN", 4);
  out.put(static_cast<char>(kMtenVersion));
  out.put(static_cast<char>(shape.size()));
  for (std::size_t d : shape) {
    if (d > 0xffffffffu) throw FormatError("MTEN: extent exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw FormatError("MTEN: write failed");
}

Tensor read_mten(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MTEN", 4) != 0) {
    throw FormatError("MTEN: bad magic");
  }
  const int version = in.get();
  if (version != kMtenVersion) {
    throw FormatError("MTEN: unsupported version " + std::to_string(version));
  }
  const int rank = in.get();
  if (rank <= 0) throw FormatError("MTEN: rank must be at least 1");
  Shape shape(static_cast<std::size_t>(rank));
  for (auto& d : shape) {
    d = get_u32(in);
    if (d == 0) throw FormatError("MTEN: zero extent");
  }
  const std::size_t n = shape_size(shape);
  std::vector<unsigned char> raw(n * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("MTEN: truncated payload, expected " +
                      std::to_string(n) + " floats");
  }
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                            (std::uint32_t(b[2]) << 16) |
                            (std::uint32_t(b[3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  try {
    return Tensor(std::move(shape), std::move(values));
  } catch (const NumericError&) {
    throw FormatError("MTEN: payload contains non-finite values");
  }
}

void save_mten(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_mten(out, tensor);
}

Tensor load_mten(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_mten(in);
}

}  // namespace mffcn
