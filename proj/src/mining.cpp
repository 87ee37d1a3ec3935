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

#include "oim/mining.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "oim/geometry.hpp"

namespace oim {

void MiningConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ValidationError("mining: T must lie in (0, 1)");
  }
  if (!(alpha > 0.0)) throw ValidationError("mining: alpha must be positive");
}

namespace {

void check_scores(const ProposalSet& ps, int class_id) {
  if (ps.size() == 0) throw ValidationError("mining: image '" + ps.image_id + "' has no proposals");
  if (ps.scores.rows() != static_cast<Eigen::Index>(ps.size()) || class_id >= ps.scores.cols()) {
    throw ValidationError("mining: image '" + ps.image_id + "' has no scores for class " +
                          std::to_string(class_id));
  }
}

std::vector<double> distances_to(const ProposalSet& ps, int core) {
  std::vector<double> d(ps.size());
  for (std::size_t j = 0; j < ps.size(); ++j) {
    d[j] = appearance_distance(ps.features.row(core).transpose(), ps.features.row(j).transpose());
  }
  return d;
}

SpatialGraph singleton(int center) {
  SpatialGraph g;
  g.core = center;
  g.nodes = {center};
  return g;
}

}  // namespace

int select_core(const ProposalSet& ps, int class_id) {
  if (!ps.has_label(class_id)) {
    throw ValidationError("class not active: " + std::to_string(class_id) + " in image '" +
                          ps.image_id + "'");
  }
  check_scores(ps, class_id);
  int best = 0;
  for (Eigen::Index j = 1; j < ps.scores.rows(); ++j) {
    if (ps.scores(j, class_id) > ps.scores(best, class_id)) best = static_cast<int>(j);
  }
  return best;
}

SpatialGraph build_spatial_graph(const ProposalSet& ps, int center, const MiningConfig& cfg) {
  if (center < 0 || static_cast<std::size_t>(center) >= ps.size()) {
    throw ValidationError("build_spatial_graph: center index out of range");
  }
  SpatialGraph g = singleton(center);
  for (std::size_t j = 0; j < ps.size(); ++j) {
    if (static_cast<int>(j) == center) continue;
    const double overlap = iou(ps.boxes[center], ps.boxes[j]);
    if (overlap > cfg.iou_threshold) {
      g.nodes.push_back(static_cast<int>(j));
      g.edges.push_back({center, static_cast<int>(j), overlap});
    }
  }
  return g;
}

double appearance_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("appearance_distance: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  return (a - b).norm();
}

double average_graph_distance(const ProposalSet& ps, const SpatialGraph& core_graph,
                              const MiningConfig& cfg) {
  double total = 0.0;
  int count = 0;
  for (int k : core_graph.nodes) {
    if (k == core_graph.core && !cfg.include_core_in_davg) continue;
    total += appearance_distance(ps.features.row(core_graph.core).transpose(),
                                 ps.features.row(k).transpose());
    ++count;
  }
  return count == 0 ? 0.0 : total / count;
}

AppearanceGraph mine_instances(const ProposalSet& ps, int class_id, const MiningConfig& cfg) {
  AppearanceGraph out;
  out.class_id = class_id;
  out.core = select_core(ps, class_id);
  const int core = out.core;

  SpatialGraph core_graph = build_spatial_graph(ps, core, cfg);
  out.d_avg = average_graph_distance(ps, core_graph, cfg);
  out.nodes = {core};
  out.spatial.push_back(std::move(core_graph));

  const std::vector<double> dist = distances_to(ps, core);
  std::vector<int> order(ps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

  const double gate = cfg.alpha * out.d_avg;
  for (int j : order) {
    if (j == core) continue;
    // Ascending order: once the gate fails it fails for every later candidate.
    if (!(dist[j] < gate)) break;
    const bool overlaps = std::any_of(out.nodes.begin(), out.nodes.end(), [&](int k) {
      return iou(ps.boxes[k], ps.boxes[j]) > 0.0;
    });
    if (overlaps) continue;
    out.nodes.push_back(j);
    out.edges.push_back({core, j, dist[j]});
    out.spatial.push_back(build_spatial_graph(ps, j, cfg));
  }
  return out;
}

AppearanceGraph mine_with_strategy(const ProposalSet& ps, int class_id, const MiningConfig& cfg,
                                   MiningStrategy strategy) {
  switch (strategy) {
    case MiningStrategy::kFull:
      return mine_instances(ps, class_id, cfg);
    case MiningStrategy::kAppearanceOnly: {
      AppearanceGraph g = mine_instances(ps, class_id, cfg);
      for (auto& sg : g.spatial) sg = singleton(sg.core);
      return g;
    }
    case MiningStrategy::kCoreSpatial: {
      AppearanceGraph g;
      g.class_id = class_id;
      g.core = select_core(ps, class_id);
      g.nodes = {g.core};
      g.spatial.push_back(build_spatial_graph(ps, g.core, cfg));
      g.d_avg = average_graph_distance(ps, g.spatial.front(), cfg);
      return g;
    }
  }
  throw ValidationError("unknown mining strategy");
}

std::vector<AppearanceGraph> mine_all(const ProposalSet& ps, const MiningConfig& cfg,
                                      MiningStrategy strategy) {
  std::vector<AppearanceGraph> out;
  for (int c : ps.active_classes()) out.push_back(mine_with_strategy(ps, c, cfg, strategy));
  return out;
}

PseudoLabels assign_pseudo_labels(const ProposalSet& ps,
                                  const std::vector<AppearanceGraph>& graphs) {
  const std::size_t n = ps.size();
  PseudoLabels out;
  out.label.assign(n, kBackground);
  out.weight.assign(n, 1.0);
  out.is_core.assign(n, 0);
  out.owner.assign(n, -1);

  // Best claim so far on each proposal: IoU with the claiming graph center
  // and that graph's class. Larger IoU wins, then the lower class.
  std::vector<double> claim_iou(n, -1.0);
  std::vector<int> claim_class(n, 0);

  struct Center {
    int index;
    double weight;
  };
  std::vector<Center> centers;

  for (const auto& g : graphs) {
    const double w = std::clamp(ps.scores(g.core, g.class_id), 0.0, 1.0);
    for (const auto& sg : g.spatial) {
      centers.push_back({sg.core, w});
      for (int j : sg.nodes) {
        const double overlap = j == sg.core ? 1.0 : iou(ps.boxes[sg.core], ps.boxes[j]);
        const bool wins = overlap > claim_iou[j] ||
                          (overlap == claim_iou[j] && g.class_id < claim_class[j]);
        if (!wins) continue;
        claim_iou[j] = overlap;
        claim_class[j] = g.class_id;
        out.label[j] = g.class_id;
        out.weight[j] = w;
        out.owner[j] = sg.core;
        out.is_core[j] = j == sg.core ? 1 : 0;
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    if (out.owner[j] >= 0) continue;
    double best = 0.0;
    for (const auto& c : centers) {
      const double overlap = iou(ps.boxes[c.index], ps.boxes[j]);
      if (overlap > best) {
        best = overlap;
        out.weight[j] = c.weight;
      }
    }
  }
  return out;
}

}  // namespace oim
