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
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oim {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Input that violates a documented precondition or file schema.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while executing an otherwise valid request (I/O, divergence).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned rectangle in continuous image coordinates. Corners are
/// (x1, y1) and (x2, y2); area is (x2 - x1) * (y2 - y1).
struct BoxF {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return valid() ? width() * height() : 0.0; }
  bool valid() const;

  bool operator==(const BoxF&) const = default;
};

/// Background is class 0; foreground classes are 1..C.
inline constexpr int kBackground = 0;

/// Proposals of one image. `scores` has C + 1 columns (column 0 is
/// background) and may be empty until a head or oracle fills it.
/// `image_labels[c - 1]` is 1 when class c is present in the image.
struct ProposalSet {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<BoxF> boxes;
  Matrix features;
  Matrix scores;
  std::vector<std::uint8_t> image_labels;

  std::size_t size() const { return boxes.size(); }
  int num_classes() const { return static_cast<int>(image_labels.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  bool has_label(int class_id) const {
    return class_id >= 1 && class_id <= num_classes() && image_labels[class_id - 1] != 0;
  }
  std::vector<int> active_classes() const;
};

struct GtInstance {
  BoxF box;
  int class_id = 0;
  bool operator==(const GtInstance&) const = default;
};
using GroundTruth = std::vector<GtInstance>;

struct Sample {
  ProposalSet proposals;
  GroundTruth gt;
  bool has_gt = false;
};

struct Dataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<Sample> images;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
};

struct Edge {
  int from = 0;
  int to = 0;
  double weight = 0.0;  // IoU for spatial edges, feature distance for appearance edges
};

/// Star graph around `core`: every other node overlaps it with IoU > T.
/// `nodes` starts with the core, remaining nodes in ascending index order.
struct SpatialGraph {
  int core = 0;
  std::vector<int> nodes;
  std::vector<Edge> edges;

  bool contains(int index) const;
};

/// Appearance graph for one class. `nodes` holds the core first, then the
/// mined proposals in the order they were accepted (ascending distance).
/// `spatial[i]` is the spatial graph built around `nodes[i]`.
struct AppearanceGraph {
  int class_id = 0;
  int core = 0;
  std::vector<int> nodes;
  std::vector<Edge> edges;
  double d_avg = 0.0;
  std::vector<SpatialGraph> spatial;
};

/// Per-proposal supervision for a refinement head.
struct PseudoLabels {
  std::vector<int> label;            // 0..C
  std::vector<double> weight;        // w_j in [0, 1]
  std::vector<std::uint8_t> is_core; // center of a mined spatial graph
  std::vector<int> owner;            // center index of the owning graph, or -1

  std::size_t size() const { return label.size(); }
};

enum class ViolationKind {
  kDimensionMismatch,
  kDegenerateBox,
  kEmptyLabels,
  kScoreOutOfRange,
  kNonFinite,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

const char* to_string(ViolationKind kind);

/// Checks every ProposalSet invariant; an empty result means valid.
/// Label emptiness is only reported when `require_labels` is set.
std::vector<Violation> validate_proposal_set(const ProposalSet& ps, bool require_labels = true);

/// Throws ValidationError carrying every violation.
void require_valid(const ProposalSet& ps, bool require_labels = true);

}  // namespace oim
