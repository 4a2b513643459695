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

#ifndef MFFCN_TOOLS_CLI_HPP_
#define MFFCN_TOOLS_CLI_HPP_

namespace mffcn::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailed = 1;  // a check ran and did not pass
inline constexpr int kExitBadInput = 2;    // flags, files or shapes invalid
inline constexpr int kExitNumeric = 3;     // NaN/Inf or degenerate signal
inline constexpr int kExitInternal = 4;

// Parses argv and runs one subcommand. Reports go to stdout, diagnostics to
// stderr.
int run(int argc, const char* const* argv);

}  // namespace mffcn::cli

#endif  // MFFCN_TOOLS_CLI_HPP_
