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

#include <vector>

#include "oim/types.hpp"

namespace oim {

struct MiningConfig {
  double iou_threshold = 0.5;  // T: spatial-graph membership needs IoU > T
  double alpha = 5.0;          // appearance gate: D < alpha * D_avg
  bool include_core_in_davg = true;

  void validate() const;
};

/// Which parts of instance mining are active. kCoreSpatial is the
/// single-instance scheme (core plus its spatial graph), kAppearanceOnly mines
/// appearance nodes without growing spatial graphs around them, kFull is the
/// complete spatial + appearance procedure.
enum class MiningStrategy { kCoreSpatial, kAppearanceOnly, kFull };

/// Top-scoring proposal for `class_id`; ties go to the lowest index.
/// Throws ValidationError when the class is not in the image labels.
int select_core(const ProposalSet& ps, int class_id);

SpatialGraph build_spatial_graph(const ProposalSet& ps, int center, const MiningConfig& cfg);

/// Euclidean distance between two feature rows.
double appearance_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Mean core-to-node distance over the core's spatial graph.
double average_graph_distance(const ProposalSet& ps, const SpatialGraph& core_graph,
                              const MiningConfig& cfg);

/// Core selection, spatial graph, D_avg, then greedy appearance mining over
/// proposals sorted by ascending distance to the core. A candidate joins
/// when D < alpha * D_avg and it has zero overlap with every node accepted
/// so far. Each accepted node gets its own spatial graph.
AppearanceGraph mine_instances(const ProposalSet& ps, int class_id, const MiningConfig& cfg);

AppearanceGraph mine_with_strategy(const ProposalSet& ps, int class_id, const MiningConfig& cfg,
                                   MiningStrategy strategy);

/// One graph per active class, in ascending class order.
std::vector<AppearanceGraph> mine_all(const ProposalSet& ps, const MiningConfig& cfg,
                                      MiningStrategy strategy = MiningStrategy::kFull);

/// Turns mined graphs into per-proposal supervision. Proposals inside a
/// spatial graph take its class and the mining core's score as weight;
/// graph centers are flagged as cores. Everything else is background with
/// the weight of the most-overlapping core (1.0 if it overlaps none).
PseudoLabels assign_pseudo_labels(const ProposalSet& ps, const std::vector<AppearanceGraph>& graphs);

}  // namespace oim
