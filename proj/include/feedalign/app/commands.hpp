// Copyright 2026 The feedalign Authors. All Rights Reserved.
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
#include <string>
#include <vector>

#include "feedalign/app/config.hpp"

namespace feedalign::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Entry point of the command-line tool: `feedalign <subcommand> [flags]`.
/// Messages go to `out` / `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_checkgrad(const RunConfig& cfg, std::ostream& out);
int cmd_align(const RunConfig& cfg, std::ostream& out);
int cmd_memreport(const RunConfig& cfg, std::ostream& out);

}  // namespace feedalign::app
