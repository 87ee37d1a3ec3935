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

#include "oim/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace oim {

bool BoxF::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x2 > x1 && y2 > y1;
}

std::vector<int> ProposalSet::active_classes() const {
  std::vector<int> out;
  for (int c = 1; c <= num_classes(); ++c) {
    if (has_label(c)) out.push_back(c);
  }
  return out;
}

bool SpatialGraph::contains(int index) const {
  return std::find(nodes.begin(), nodes.end(), index) != nodes.end();
}

const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kDimensionMismatch: return "dimension mismatch";
    case ViolationKind::kDegenerateBox: return "degenerate box";
    case ViolationKind::kEmptyLabels: return "empty labels";
    case ViolationKind::kScoreOutOfRange: return "score out of range";
    case ViolationKind::kNonFinite: return "non-finite value";
  }
  return "unknown";
}

std::vector<Violation> validate_proposal_set(const ProposalSet& ps, bool require_labels) {
  std::vector<Violation> out;
  auto add = [&out](ViolationKind kind, const std::string& msg) {
    out.push_back({kind, std::string(to_string(kind)) + ": " + msg});
  };

  const auto n = static_cast<Eigen::Index>(ps.boxes.size());
  if (n == 0) add(ViolationKind::kDimensionMismatch, "no proposals");
  if (ps.features.rows() != n) {
    std::ostringstream os;
    os << ps.boxes.size() << " boxes but " << ps.features.rows() << " feature rows";
    add(ViolationKind::kDimensionMismatch, os.str());
  }
  if (ps.scores.size() != 0) {
    if (ps.scores.rows() != n || ps.scores.cols() != ps.num_classes() + 1) {
      std::ostringstream os;
      os << "scores are " << ps.scores.rows() << "x" << ps.scores.cols() << ", expected " << n
         << "x" << ps.num_classes() + 1;
      add(ViolationKind::kDimensionMismatch, os.str());
    } else if (!ps.scores.allFinite()) {
      add(ViolationKind::kNonFinite, "scores");
    } else if (ps.scores.minCoeff() < 0.0 || ps.scores.maxCoeff() > 1.0) {
      add(ViolationKind::kScoreOutOfRange, "scores must lie in [0, 1]");
    }
  }
  for (std::size_t j = 0; j < ps.boxes.size(); ++j) {
    if (!ps.boxes[j].valid()) {
      const auto& b = ps.boxes[j];
      std::ostringstream os;
      os << "proposal " << j << " (" << b.x1 << "," << b.y1 << "," << b.x2 << "," << b.y2 << ")";
      add(ViolationKind::kDegenerateBox, os.str());
    }
  }
  if (ps.features.size() != 0 && !ps.features.allFinite()) add(ViolationKind::kNonFinite, "features");
  if (require_labels &&
      std::none_of(ps.image_labels.begin(), ps.image_labels.end(), [](auto v) { return v != 0; })) {
    add(ViolationKind::kEmptyLabels, "image '" + ps.image_id + "' has no positive label");
  }
  return out;
}

void require_valid(const ProposalSet& ps, bool require_labels) {
  const auto violations = validate_proposal_set(ps, require_labels);
  if (violations.empty()) return;
  std::string msg = "invalid proposal set '" + ps.image_id + "':";
  for (const auto& v : violations) msg += "\n  " + v.message;
  throw ValidationError(msg);
}

}  // namespace oim
