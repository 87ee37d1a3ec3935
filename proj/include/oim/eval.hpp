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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oim/types.hpp"

namespace oim {

struct Detection {
  std::string image_id;
  int class_id = 0;
  BoxF box;
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

enum class ApMode { kElevenPoint, kArea };

/// Ground truth keyed by image id.
using GtIndex = std::map<std::string, GroundTruth>;

GtIndex index_ground_truth(const Dataset& dataset);

/// VOC-style AP for one class. Detections are ranked by descending score
/// (stable); each is a true positive when its best-overlapping ground truth
/// of the class has IoU >= iou_match and has not been claimed yet. Returns
/// nullopt when the class has no ground-truth instance.
std::optional<double> average_precision(std::span<const Detection> detections, const GtIndex& gt,
                                        int class_id, double iou_match = 0.5,
                                        ApMode mode = ApMode::kElevenPoint);

/// AP from a ranked true/false-positive sequence.
double ap_from_ranked(std::span<const std::uint8_t> is_tp, int num_gt, ApMode mode);

struct ClassMetrics {
  int num_gt = 0;
  int positive_images = 0;
  std::optional<double> ap;
  std::optional<double> corloc;
};

struct MetricsReport {
  std::map<int, ClassMetrics> per_class;
  std::optional<double> mean_ap;
  std::optional<double> corloc;
  std::optional<double> instance_recall;
};

/// Mean over classes with a defined AP.
MetricsReport mean_average_precision(std::span<const Detection> detections, const GtIndex& gt,
                                     int num_classes, double iou_match = 0.5,
                                     ApMode mode = ApMode::kElevenPoint);

/// Fraction of (image, class) pairs with a ground-truth instance of the class
/// whose top-scoring detection has IoU >= iou_match with one of them. Fills
/// the per-class CorLoc entries of `report` and its overall value.
void corloc(std::span<const Detection> detections, const GtIndex& gt, int num_classes,
            MetricsReport& report, double iou_match = 0.5);

MetricsReport evaluate_detections(std::span<const Detection> detections, const GtIndex& gt,
                                  int num_classes, double iou_match = 0.5,
                                  ApMode mode = ApMode::kElevenPoint);

struct RecallCount {
  int covered = 0;
  int total = 0;
  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(covered) / total; }
  RecallCount& operator+=(const RecallCount& o) {
    covered += o.covered;
    total += o.total;
    return *this;
  }
};

/// Ground-truth instances covered one-to-one by mined appearance-graph nodes
/// of the right class at IoU >= iou_match. Matching is greedy by IoU.
RecallCount instance_recall_counts(const ProposalSet& ps, const GroundTruth& gt,
                                   const std::vector<AppearanceGraph>& graphs,
                                   double iou_match = 0.5);

double instance_recall(const Dataset& dataset,
                       const std::vector<std::vector<AppearanceGraph>>& graphs,
                       double iou_match = 0.5);

/// Per class: top-k by score, then NMS. Classes 1..C of `scores` (N x C+1).
std::vector<Detection> detections_from_scores(const ProposalSet& ps, const Matrix& scores,
                                              int top_k = 100, double nms_iou = 0.3);

}  // namespace oim
