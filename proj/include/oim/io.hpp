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
#include <vector>

#include "oim/eval.hpp"
#include "oim/mil_head.hpp"
#include "oim/trainer.hpp"
#include "oim/types.hpp"

namespace oim {

// Dataset files are JSON Lines, one image per line:
//
//   {"image_id": "img_0001", "width": 640, "height": 480, "num_classes": 4,
//    "labels": [1, 3],
//    "proposals": [{"box": [x1, y1, x2, y2], "feature": [...]}, ...],
//    "gt": [{"box": [x1, y1, x2, y2], "class": 1}, ...]}
//
// "num_classes" and "gt" are optional. Without "num_classes" anywhere in the
// file, C is the largest class id mentioned by labels or ground truth.
// Errors name the 1-based line and the offending field.

Dataset parse_dataset(std::istream& in, std::vector<std::string>* warnings = nullptr);
Dataset load_dataset(const std::filesystem::path& path,
                     std::vector<std::string>* warnings = nullptr);
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Per-image proposal scores, {"image_id": ..., "scores": [[C + 1 values], ...]}.
using ScoreTable = std::map<std::string, Matrix>;
ScoreTable parse_scores(std::istream& in);
ScoreTable load_scores(const std::filesystem::path& path);
void save_scores(const std::filesystem::path& path, const Dataset& dataset);
/// Copies scores into every image; shapes must be N x (C + 1).
void attach_scores(Dataset& dataset, const ScoreTable& scores);

/// {"image_id": ..., "class": c, "box": [...], "score": s} per line.
std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> load_detections(const std::filesystem::path& path);
void save_detections(const std::filesystem::path& path, const std::vector<Detection>& dets);

std::string metrics_to_json(const MetricsReport& report);
std::string trace_to_jsonl(const std::vector<TraceRecord>& trace);
std::string mined_to_jsonl(const Dataset& dataset,
                           const std::vector<std::vector<AppearanceGraph>>& graphs);
std::string ablation_to_json(const AblationReport& report);

/// Plain-text checkpoint. Doubles are written in shortest round-trip form,
/// so load(save(m)) == m bit for bit.
void write_checkpoint(std::ostream& out, const MidModel& model);
MidModel read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const MidModel& model);
MidModel load_checkpoint(const std::filesystem::path& path);

/// Written next to the outputs of every CLI run. Contains no timestamps so
/// repeated runs produce identical bytes.
struct Manifest {
  std::string command;
  std::string version;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};
std::string manifest_to_json(const Manifest& manifest);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Writes `text` to `path`, creating parent directories. Throws RuntimeFailure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

const char* library_version();

}  // namespace oim
