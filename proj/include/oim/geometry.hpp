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

#include <span>
#include <vector>

#include "oim/types.hpp"

namespace oim {

double intersection_area(const BoxF& a, const BoxF& b);

/// Intersection over union in [0, 1]. Degenerate boxes have IoU 0 with
/// everything, themselves included.
double iou(const BoxF& a, const BoxF& b);

/// Greedy non-maximum suppression. A box is suppressed when its IoU with an
/// already kept box is strictly greater than `iou_threshold`. The result is
/// ordered by descending score; equal scores keep the lower index first.
std::vector<int> nms(std::span<const BoxF> boxes, std::span<const double> scores,
                     double iou_threshold);

/// Indices of the `k` largest scores, descending, ties by lower index.
std::vector<int> top_k(std::span<const double> scores, int k);

/// top_k over column `class_id` of `ps.scores`.
std::vector<int> top_k_by_score(const ProposalSet& ps, int class_id, int k);

}  // namespace oim
