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
#include <span>
#include <vector>

#include "oim/types.hpp"

namespace oim {

/// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] before logs.
inline constexpr double kProbEpsilon = 1e-7;

/// Two-stream weighted MIL pooling head plus K refinement classifiers, all
/// linear over the proposal features. Also used as the gradient container.
struct MidModel {
  int feature_dim = 0;
  int num_classes = 0;
  int num_heads = 0;
  Matrix cls_weight;  // d x C, softmax over classes
  Vector cls_bias;
  Matrix det_weight;  // d x C, softmax over proposals
  Vector det_bias;
  std::vector<Matrix> ref_weight;  // K of d x (C + 1)
  std::vector<Vector> ref_bias;

  /// Gaussian weights with standard deviation `init_scale`, zero biases.
  static MidModel create(int feature_dim, int num_classes, int num_heads, std::uint64_t seed,
                         double init_scale = 0.01);
  static MidModel zeros_like(const MidModel& m);

  void add_scaled(const MidModel& other, double scale);
  bool all_finite() const;
  void validate() const;
  bool operator==(const MidModel& other) const;
};

struct LossConfig {
  double beta = 0.2;
  bool enable_reweighting = true;

  void validate() const;
};

struct MidForward {
  Matrix cls_probs;        // N x C
  Matrix det_probs;        // N x C
  Matrix proposal_scores;  // N x C, elementwise product
  Vector raw_image_scores; // column sums
  Vector image_scores;     // clamped to [eps, 1 - eps]
};

MidForward mid_forward(const MidModel& model, const Matrix& features);

/// Per-proposal class distribution of refinement head `head` (1-based).
Matrix refine_forward(const MidModel& model, int head, const Matrix& features);
Matrix refine_logits(const MidModel& model, int head, const Matrix& features);

Matrix softmax_rows(const Matrix& logits);

/// Multi-label binary cross entropy summed over classes.
double image_classification_loss(const Vector& image_scores, std::span<const std::uint8_t> labels);

/// Adds d(image_classification_loss)/d(params) of the MID streams to `grad`
/// and returns the loss.
double mid_backward(const MidModel& model, const Matrix& features, const MidForward& fwd,
                    std::span<const std::uint8_t> labels, MidModel& grad);

/// z_j: beta for surrounding proposals, beta - 1 for the graph center.
double oir_weight(bool is_core, const LossConfig& cfg);

/// -(1/N) sum_j w_j (1 + z_j) log x[j, label_j]; z_j = 0 when reweighting is off.
double refinement_loss(const Matrix& probs, const PseudoLabels& labels, const LossConfig& cfg);

/// Gradient of refinement_loss(softmax_rows(logits)) with respect to logits.
Matrix refinement_loss_grad(const Matrix& logits, const PseudoLabels& labels, const LossConfig& cfg);

/// Adds the parameter gradient of head `head` given d(loss)/d(logits).
void refine_backward(const Matrix& features, const Matrix& logit_grad, int head, MidModel& grad);

/// Mean class distribution over all refinement heads, N x (C + 1).
Matrix detection_scores(const MidModel& model, const Matrix& features);

/// MID proposal scores widened to C + 1 columns with a zero background column.
Matrix with_background_column(const Matrix& proposal_scores);

}  // namespace oim
