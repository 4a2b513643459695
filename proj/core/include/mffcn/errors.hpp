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

#ifndef MFFCN_ERRORS_HPP_
#define MFFCN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mffcn {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit an operation's contract. The message names
// the offending axis.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, or a numerically degenerate input
// (zero-energy reference signal and the like).
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the gradient tape.
class TapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mffcn

#endif  // MFFCN_ERRORS_HPP_
