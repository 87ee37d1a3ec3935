// Copyright 2026 The OIM Authors. All Rights Reserved.
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

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "oim/synth.hpp"
#include "oim/trainer.hpp"

namespace oim {

// key = value files. '#' starts a comment; blank lines are ignored.
// Training keys are bare (`iterations = 500`), generator keys carry a
// `synth.` prefix (`synth.num_images = 50`).
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::istream& in);
ConfigMap load_config(const std::filesystem::path& path);

/// Applies every key to the matching field. Unknown keys and malformed
/// values throw ValidationError naming the key.
void apply_config(const ConfigMap& config, TrainConfig& train, SynthConfig& synth);

/// Every field of both configs in key = value form; used for manifests.
ConfigMap config_snapshot(const TrainConfig& train, const SynthConfig& synth);

std::string format_config(const ConfigMap& config);

}  // namespace oim
