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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "oim/eval.hpp"
#include "oim/trainer.hpp"
#include "oim/types.hpp"

namespace oim {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Objectness map for `class_id`: each pixel holds the largest scores(j, c)
/// over proposals whose box contains the pixel center, scaled to 0..255.
/// The longer image side is rasterized at `resolution` pixels.
GrayImage render_objectness_map(const ProposalSet& ps, const Matrix& scores, int class_id,
                                int resolution = 256);

/// Binary PGM (P5).
std::string encode_pgm(const GrayImage& image);

/// Outlines of `detections` belonging to this image, on an image-sized canvas.
std::string render_detections_svg(const ProposalSet& ps, const std::vector<Detection>& detections,
                                  const GroundTruth* gt = nullptr);

/// Snapshot of mined graphs: spatial-graph members as thin outlines, graph
/// centers bold, appearance edges as lines between centers.
std::string render_graph_svg(const ProposalSet& ps, const std::vector<AppearanceGraph>& graphs);

/// Markdown table of an ablation report (medians, then per-seed values).
std::string render_ablation_table(const AblationReport& report);

}  // namespace oim
