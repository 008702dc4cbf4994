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

#include <string>
#include <vector>

#include "feedalign/app/config.hpp"

namespace feedalign::app {

/// Names accepted by --preset.
const std::vector<std::string>& preset_names();

/// Network layout for a preset and class count. ConfigError if unknown.
NetworkSpec preset_network(const std::string& name);

/// A RunConfig holding the preset's dataset and hyperparameter defaults.
RunConfig preset_config(const std::string& name);

}  // namespace feedalign::app
