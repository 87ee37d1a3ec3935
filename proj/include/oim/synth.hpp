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

#include <array>
#include <cstdint>
#include <vector>

#include "oim/types.hpp"

namespace oim {

/// Synthetic multi-instance scenes.
///
/// Every object is a ground-truth box with a "part" sub-box. A proposal's
/// feature responds to each object in proportion to how well the box matches
/// it, and to the object's part in proportion to how well it matches the part
/// (scaled by part_confound_strength). Uncovered area contributes background
/// content, and isotropic Gaussian noise is added on top.
///
/// `seed` drives scene layout and noise; `prototype_seed` fixes the class
/// appearance model, so splits generated with different seeds share classes.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::uint64_t prototype_seed = 7;
  int num_images = 100;
  double width = 640.0;
  double height = 480.0;
  int num_classes = 4;
  int max_active_classes = 2;
  // Relative weights for 1, 2, 3 and 4 instances of an active class.
  std::array<double, 4> instance_weights{0.0, 0.5, 0.3, 0.2};
  double min_object_size = 56.0;
  double max_object_size = 112.0;
  double object_gap = 8.0;
  int feature_dim = 32;
  double prototype_separation = 6.0;
  double noise_sigma = 0.5;
  double part_confound_strength = 0.75;
  double part_fraction = 0.35;
  int proposals_per_object = 8;
  int background_proposals = 24;

  void validate() const;
};

/// IoU targets cycled through by the jittered per-object proposals.
inline constexpr std::array<double, 4> kIouStrata{0.9, 0.7, 0.5, 0.3};

/// Provenance of each generated proposal, for generator self-checks.
struct ProposalOrigin {
  enum class Kind { kJittered, kPart, kBackground };
  Kind kind = Kind::kBackground;
  int object = -1;          // index into the image's ground truth
  double target_iou = 0.0;  // stratum for kJittered
};

struct SynthImageInfo {
  std::vector<ProposalOrigin> origins;
  std::vector<BoxF> parts;  // one per ground-truth instance
};

struct SynthResult {
  Dataset dataset;
  std::vector<SynthImageInfo> info;
};

/// Class prototypes shared by all images of a prototype seed.
struct SynthPrototypes {
  Matrix body;         // C x d
  Matrix part_offset;  // C x d
  Vector background;   // d
};

SynthPrototypes make_prototypes(const SynthConfig& cfg);

SynthResult generate_with_info(const SynthConfig& cfg);
Dataset generate(const SynthConfig& cfg);

/// Perfect-localization scores: column c is the best IoU with a ground-truth
/// instance of class c, column 0 is one minus the best foreground column.
Matrix oracle_scores(const ProposalSet& ps, const GroundTruth& gt);
std::vector<Matrix> oracle_scores(const Dataset& dataset);

/// Writes oracle scores into every image's ProposalSet.
void apply_oracle_scores(Dataset& dataset);

}  // namespace oim
