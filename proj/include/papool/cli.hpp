// Copyright 2026 The papool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <iosfwd>

namespace papool {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `papool` tool. Subcommands: gen-data, train, eval,
/// gradcheck, ablate, bench, inspect-weights. Returns 0 on success, 1 on an
/// internal failure (or a failed gradcheck), 2 on bad user input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace papool
