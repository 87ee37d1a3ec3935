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

#include "oim/eval.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "oim/geometry.hpp"
#include "oim/mining.hpp"

namespace oim {

GtIndex index_ground_truth(const Dataset& dataset) {
  GtIndex out;
  for (const auto& s : dataset.images) {
    if (s.has_gt) out[s.proposals.image_id] = s.gt;
  }
  return out;
}

double ap_from_ranked(std::span<const std::uint8_t> is_tp, int num_gt, ApMode mode) {
  if (num_gt <= 0) return 0.0;
  std::vector<double> recall(is_tp.size());
  std::vector<double> precision(is_tp.size());
  int tp = 0;
  for (std::size_t i = 0; i < is_tp.size(); ++i) {
    tp += is_tp[i] != 0 ? 1 : 0;
    recall[i] = static_cast<double>(tp) / num_gt;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }

  if (mode == ApMode::kElevenPoint) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double level = t / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i) {
        if (recall[i] >= level) best = std::max(best, precision[i]);
      }
      ap += best;
    }
    return ap / 11.0;
  }

  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return ap;
}

std::optional<double> average_precision(std::span<const Detection> detections, const GtIndex& gt,
                                        int class_id, double iou_match, ApMode mode) {
  int num_gt = 0;
  std::map<std::string, std::vector<bool>> claimed;
  for (const auto& [image, instances] : gt) {
    auto& flags = claimed[image];
    flags.assign(instances.size(), false);
    for (const auto& g : instances) num_gt += g.class_id == class_id ? 1 : 0;
  }
  if (num_gt == 0) return std::nullopt;

  std::vector<const Detection*> ranked;
  for (const auto& d : detections) {
    if (d.class_id == class_id) ranked.push_back(&d);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Detection* a, const Detection* b) { return a->score > b->score; });

  std::vector<std::uint8_t> is_tp(ranked.size(), 0);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto it = gt.find(ranked[i]->image_id);
    if (it == gt.end()) continue;
    double best = -1.0;
    int best_k = -1;
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      if (it->second[k].class_id != class_id) continue;
      const double v = iou(ranked[i]->box, it->second[k].box);
      if (v > best) {
        best = v;
        best_k = static_cast<int>(k);
      }
    }
    if (best_k < 0 || best < iou_match) continue;
    auto& flags = claimed[it->first];
    if (!flags[best_k]) {
      flags[best_k] = true;
      is_tp[i] = 1;
    }
  }
  return ap_from_ranked(is_tp, num_gt, mode);
}

MetricsReport mean_average_precision(std::span<const Detection> detections, const GtIndex& gt,
                                     int num_classes, double iou_match, ApMode mode) {
  MetricsReport report;
  double total = 0.0;
  int defined = 0;
  for (int c = 1; c <= num_classes; ++c) {
    ClassMetrics m;
    for (const auto& [image, instances] : gt) {
      const auto n = std::count_if(instances.begin(), instances.end(),
                                   [c](const GtInstance& g) { return g.class_id == c; });
      m.num_gt += static_cast<int>(n);
      m.positive_images += n > 0 ? 1 : 0;
    }
    m.ap = average_precision(detections, gt, c, iou_match, mode);
    if (m.ap) {
      total += *m.ap;
      ++defined;
    }
    report.per_class[c] = m;
  }
  if (defined > 0) report.mean_ap = total / defined;
  return report;
}

void corloc(std::span<const Detection> detections, const GtIndex& gt, int num_classes,
            MetricsReport& report, double iou_match) {
  // Top detection per (image, class); earlier entries win ties.
  std::map<std::pair<std::string, int>, const Detection*> top;
  for (const auto& d : detections) {
    auto key = std::make_pair(d.image_id, d.class_id);
    auto it = top.find(key);
    if (it == top.end() || d.score > it->second->score) top[key] = &d;
  }
  int hits = 0;
  int pairs = 0;
  for (int c = 1; c <= num_classes; ++c) {
    int class_hits = 0;
    int class_pairs = 0;
    for (const auto& [image, instances] : gt) {
      const bool positive = std::any_of(instances.begin(), instances.end(),
                                        [c](const GtInstance& g) { return g.class_id == c; });
      if (!positive) continue;
      ++class_pairs;
      const auto it = top.find({image, c});
      if (it == top.end()) continue;
      const bool hit = std::any_of(instances.begin(), instances.end(), [&](const GtInstance& g) {
        return g.class_id == c && iou(g.box, it->second->box) >= iou_match;
      });
      class_hits += hit ? 1 : 0;
    }
    auto& m = report.per_class[c];
    m.positive_images = class_pairs;
    if (class_pairs > 0) m.corloc = static_cast<double>(class_hits) / class_pairs;
    hits += class_hits;
    pairs += class_pairs;
  }
  if (pairs > 0) report.corloc = static_cast<double>(hits) / pairs;
}

MetricsReport evaluate_detections(std::span<const Detection> detections, const GtIndex& gt,
                                  int num_classes, double iou_match, ApMode mode) {
  MetricsReport report = mean_average_precision(detections, gt, num_classes, iou_match, mode);
  corloc(detections, gt, num_classes, report, iou_match);
  return report;
}

RecallCount instance_recall_counts(const ProposalSet& ps, const GroundTruth& gt,
                                   const std::vector<AppearanceGraph>& graphs, double iou_match) {
  RecallCount out;
  out.total = static_cast<int>(gt.size());
  // (iou, node position, gt index) candidates, matched greedily by IoU.
  std::vector<std::tuple<double, int, int>> pairs;
  std::vector<std::pair<int, int>> nodes;  // (proposal, class)
  for (const auto& g : graphs) {
    for (int j : g.nodes) nodes.emplace_back(j, g.class_id);
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    for (std::size_t k = 0; k < gt.size(); ++k) {
      if (gt[k].class_id != nodes[n].second) continue;
      const double v = iou(ps.boxes[nodes[n].first], gt[k].box);
      if (v >= iou_match) pairs.emplace_back(v, static_cast<int>(n), static_cast<int>(k));
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<bool> node_used(nodes.size(), false);
  std::vector<bool> gt_used(gt.size(), false);
  for (const auto& [v, n, k] : pairs) {
    if (node_used[n] || gt_used[k]) continue;
    node_used[n] = true;
    gt_used[k] = true;
    ++out.covered;
  }
  return out;
}

double instance_recall(const Dataset& dataset,
                       const std::vector<std::vector<AppearanceGraph>>& graphs, double iou_match) {
  if (graphs.size() != dataset.size()) {
    throw ValidationError("instance_recall: one graph list per image is required");
  }
  RecallCount total;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset.images[i];
    if (!s.has_gt) continue;
    total += instance_recall_counts(s.proposals, s.gt, graphs[i], iou_match);
  }
  return total.fraction();
}

std::vector<Detection> detections_from_scores(const ProposalSet& ps, const Matrix& scores,
                                              int top_k_count, double nms_iou) {
  if (scores.rows() != static_cast<Eigen::Index>(ps.size())) {
    throw ValidationError("detections: score rows do not match proposals");
  }
  std::vector<Detection> out;
  std::vector<double> column(ps.size());
  for (Eigen::Index c = 1; c < scores.cols(); ++c) {
    for (std::size_t j = 0; j < ps.size(); ++j) column[j] = scores(j, c);
    const auto top = top_k(column, top_k_count);
    std::vector<BoxF> boxes;
    std::vector<double> vals;
    for (int j : top) {
      boxes.push_back(ps.boxes[j]);
      vals.push_back(column[j]);
    }
    for (int k : nms(boxes, vals, nms_iou)) {
      out.push_back({ps.image_id, static_cast<int>(c), boxes[k], vals[k]});
    }
  }
  return out;
}

}  // namespace oim
