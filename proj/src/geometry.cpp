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

#include "oim/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace oim {

double intersection_area(const BoxF& a, const BoxF& b) {
  if (!a.valid() || !b.valid()) return 0.0;
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BoxF& a, const BoxF& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

std::vector<int> descending_order(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::vector<int> nms(std::span<const BoxF> boxes, std::span<const double> scores,
                     double iou_threshold) {
  if (boxes.size() != scores.size()) {
    throw ValidationError("nms: boxes and scores differ in length");
  }
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw ValidationError("nms: threshold must lie in [0, 1]");
  }
  std::vector<int> kept;
  for (int idx : descending_order(scores)) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](int k) {
      return iou(boxes[k], boxes[idx]) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

std::vector<int> top_k(std::span<const double> scores, int k) {
  if (k < 1) throw ValidationError("top_k: k must be at least 1");
  auto order = descending_order(scores);
  if (order.size() > static_cast<std::size_t>(k)) order.resize(k);
  return order;
}

std::vector<int> top_k_by_score(const ProposalSet& ps, int class_id, int k) {
  if (class_id < 0 || class_id >= ps.scores.cols()) {
    throw ValidationError("top_k_by_score: class out of range");
  }
  std::vector<double> column(ps.scores.rows());
  for (Eigen::Index j = 0; j < ps.scores.rows(); ++j) column[j] = ps.scores(j, class_id);
  return top_k(column, k);
}

}  // namespace oim
