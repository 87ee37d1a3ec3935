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

#include "oim/mil_head.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace oim {

namespace {

void fill_normal(Matrix& m, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void check_features(const MidModel& model, const Matrix& features) {
  if (features.rows() < 1) throw ValidationError("head: at least one proposal is required");
  if (features.cols() != model.feature_dim) {
    throw ValidationError("head: feature dimension " + std::to_string(features.cols()) +
                          " does not match model dimension " + std::to_string(model.feature_dim));
  }
}

void check_head(const MidModel& model, int head) {
  if (head < 1 || head > model.num_heads) {
    throw ValidationError("head index " + std::to_string(head) + " outside 1.." +
                          std::to_string(model.num_heads));
  }
}

// Softmax down each column (over proposals).
Matrix softmax_cols(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < logits.rows(); ++j) {
      out(j, c) = std::exp(logits(j, c) - mx);
      total += out(j, c);
    }
    out.col(c) /= total;
  }
  return out;
}

void check_labels(const PseudoLabels& labels, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(labels.size()) != rows || labels.weight.size() != labels.size() ||
      labels.is_core.size() != labels.size()) {
    throw ValidationError("refinement loss: pseudo labels do not cover every proposal");
  }
  for (int c : labels.label) {
    if (c < 0 || c >= cols) throw ValidationError("refinement loss: label out of range");
  }
}

}  // namespace

MidModel MidModel::create(int feature_dim, int num_classes, int num_heads, std::uint64_t seed,
                          double init_scale) {
  if (feature_dim < 1 || num_classes < 1) {
    throw ValidationError("model: feature dimension and class count must be positive");
  }
  if (num_heads < 1 || num_heads > 5) throw ValidationError("model: K must lie in 1..5");
  MidModel m;
  m.feature_dim = feature_dim;
  m.num_classes = num_classes;
  m.num_heads = num_heads;
  std::mt19937_64 rng(seed);
  m.cls_weight.resize(feature_dim, num_classes);
  m.det_weight.resize(feature_dim, num_classes);
  fill_normal(m.cls_weight, rng, init_scale);
  fill_normal(m.det_weight, rng, init_scale);
  m.cls_bias = Vector::Zero(num_classes);
  m.det_bias = Vector::Zero(num_classes);
  for (int k = 0; k < num_heads; ++k) {
    Matrix w(feature_dim, num_classes + 1);
    fill_normal(w, rng, init_scale);
    m.ref_weight.push_back(std::move(w));
    m.ref_bias.push_back(Vector::Zero(num_classes + 1));
  }
  return m;
}

MidModel MidModel::zeros_like(const MidModel& m) {
  MidModel z;
  z.feature_dim = m.feature_dim;
  z.num_classes = m.num_classes;
  z.num_heads = m.num_heads;
  z.cls_weight = Matrix::Zero(m.cls_weight.rows(), m.cls_weight.cols());
  z.det_weight = Matrix::Zero(m.det_weight.rows(), m.det_weight.cols());
  z.cls_bias = Vector::Zero(m.cls_bias.size());
  z.det_bias = Vector::Zero(m.det_bias.size());
  for (std::size_t k = 0; k < m.ref_weight.size(); ++k) {
    z.ref_weight.push_back(Matrix::Zero(m.ref_weight[k].rows(), m.ref_weight[k].cols()));
    z.ref_bias.push_back(Vector::Zero(m.ref_bias[k].size()));
  }
  return z;
}

void MidModel::add_scaled(const MidModel& other, double scale) {
  cls_weight += scale * other.cls_weight;
  cls_bias += scale * other.cls_bias;
  det_weight += scale * other.det_weight;
  det_bias += scale * other.det_bias;
  for (std::size_t k = 0; k < ref_weight.size(); ++k) {
    ref_weight[k] += scale * other.ref_weight[k];
    ref_bias[k] += scale * other.ref_bias[k];
  }
}

bool MidModel::all_finite() const {
  bool ok = cls_weight.allFinite() && cls_bias.allFinite() && det_weight.allFinite() &&
            det_bias.allFinite();
  for (std::size_t k = 0; k < ref_weight.size(); ++k) {
    ok = ok && ref_weight[k].allFinite() && ref_bias[k].allFinite();
  }
  return ok;
}

void MidModel::validate() const {
  const auto d = feature_dim;
  const auto c = num_classes;
  bool ok = d >= 1 && c >= 1 && num_heads >= 1 && cls_weight.rows() == d &&
            cls_weight.cols() == c && det_weight.rows() == d && det_weight.cols() == c &&
            cls_bias.size() == c && det_bias.size() == c &&
            static_cast<int>(ref_weight.size()) == num_heads &&
            static_cast<int>(ref_bias.size()) == num_heads;
  for (int k = 0; ok && k < num_heads; ++k) {
    ok = ref_weight[k].rows() == d && ref_weight[k].cols() == c + 1 && ref_bias[k].size() == c + 1;
  }
  if (!ok) throw ValidationError("model: inconsistent parameter shapes");
  if (!all_finite()) throw ValidationError("model: non-finite parameters");
}

bool MidModel::operator==(const MidModel& o) const {
  if (feature_dim != o.feature_dim || num_classes != o.num_classes || num_heads != o.num_heads) {
    return false;
  }
  bool eq = cls_weight == o.cls_weight && cls_bias == o.cls_bias && det_weight == o.det_weight &&
            det_bias == o.det_bias && ref_weight.size() == o.ref_weight.size();
  for (std::size_t k = 0; eq && k < ref_weight.size(); ++k) {
    eq = ref_weight[k] == o.ref_weight[k] && ref_bias[k] == o.ref_bias[k];
  }
  return eq;
}

void LossConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw ValidationError("loss: beta must lie in [0, 1)");
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.rows(); ++j) {
    const double mx = logits.row(j).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(j, c) = std::exp(logits(j, c) - mx);
      total += out(j, c);
    }
    out.row(j) /= total;
  }
  return out;
}

MidForward mid_forward(const MidModel& model, const Matrix& features) {
  check_features(model, features);
  MidForward f;
  Matrix cls_logits = features * model.cls_weight;
  cls_logits.rowwise() += model.cls_bias.transpose();
  Matrix det_logits = features * model.det_weight;
  det_logits.rowwise() += model.det_bias.transpose();
  f.cls_probs = softmax_rows(cls_logits);
  f.det_probs = softmax_cols(det_logits);
  f.proposal_scores = f.cls_probs.cwiseProduct(f.det_probs);
  f.raw_image_scores = f.proposal_scores.colwise().sum().transpose();
  f.image_scores = f.raw_image_scores.cwiseMax(kProbEpsilon).cwiseMin(1.0 - kProbEpsilon);
  return f;
}

Matrix refine_logits(const MidModel& model, int head, const Matrix& features) {
  check_head(model, head);
  check_features(model, features);
  Matrix logits = features * model.ref_weight[head - 1];
  logits.rowwise() += model.ref_bias[head - 1].transpose();
  return logits;
}

Matrix refine_forward(const MidModel& model, int head, const Matrix& features) {
  return softmax_rows(refine_logits(model, head, features));
}

double image_classification_loss(const Vector& image_scores,
                                 std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(image_scores.size()) != labels.size()) {
    throw ValidationError("image loss: score and label lengths differ");
  }
  double loss = 0.0;
  for (Eigen::Index c = 0; c < image_scores.size(); ++c) {
    const double s = std::clamp(image_scores[c], kProbEpsilon, 1.0 - kProbEpsilon);
    loss -= labels[c] ? std::log(s) : std::log(1.0 - s);
  }
  return loss;
}

double mid_backward(const MidModel& model, const Matrix& features, const MidForward& fwd,
                    std::span<const std::uint8_t> labels, MidModel& grad) {
  const Eigen::Index n = features.rows();
  const Eigen::Index num_c = model.num_classes;
  Vector g(num_c);
  for (Eigen::Index c = 0; c < num_c; ++c) {
    const double raw = fwd.raw_image_scores[c];
    const double s = fwd.image_scores[c];
    if (raw <= kProbEpsilon || raw >= 1.0 - kProbEpsilon) {
      g[c] = 0.0;  // clamped: flat
    } else {
      g[c] = labels[c] ? -1.0 / s : 1.0 / (1.0 - s);
    }
  }

  Matrix cls_grad(n, num_c);
  for (Eigen::Index j = 0; j < n; ++j) {
    double dot = 0.0;
    for (Eigen::Index c = 0; c < num_c; ++c) dot += fwd.cls_probs(j, c) * g[c] * fwd.det_probs(j, c);
    for (Eigen::Index c = 0; c < num_c; ++c) {
      cls_grad(j, c) = fwd.cls_probs(j, c) * (g[c] * fwd.det_probs(j, c) - dot);
    }
  }
  Matrix det_grad(n, num_c);
  for (Eigen::Index c = 0; c < num_c; ++c) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) dot += fwd.det_probs(j, c) * g[c] * fwd.cls_probs(j, c);
    for (Eigen::Index j = 0; j < n; ++j) {
      det_grad(j, c) = fwd.det_probs(j, c) * (g[c] * fwd.cls_probs(j, c) - dot);
    }
  }

  grad.cls_weight.noalias() += features.transpose() * cls_grad;
  grad.cls_bias += cls_grad.colwise().sum().transpose();
  grad.det_weight.noalias() += features.transpose() * det_grad;
  grad.det_bias += det_grad.colwise().sum().transpose();
  return image_classification_loss(fwd.image_scores, labels);
}

double oir_weight(bool is_core, const LossConfig& cfg) {
  return is_core ? cfg.beta - 1.0 : cfg.beta;
}

namespace {

double multiplier(const PseudoLabels& labels, std::size_t j, const LossConfig& cfg) {
  const double z = cfg.enable_reweighting ? oir_weight(labels.is_core[j] != 0, cfg) : 0.0;
  return labels.weight[j] * (1.0 + z);
}

}  // namespace

double refinement_loss(const Matrix& probs, const PseudoLabels& labels, const LossConfig& cfg) {
  check_labels(labels, probs.rows(), probs.cols());
  const auto n = static_cast<double>(probs.rows());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < probs.rows(); ++j) {
    const double x = std::max(probs(j, labels.label[j]), kProbEpsilon);
    loss -= multiplier(labels, j, cfg) * std::log(x);
  }
  return loss / n;
}

Matrix refinement_loss_grad(const Matrix& logits, const PseudoLabels& labels,
                            const LossConfig& cfg) {
  check_labels(labels, logits.rows(), logits.cols());
  Matrix grad = softmax_rows(logits);
  const auto n = static_cast<double>(logits.rows());
  for (Eigen::Index j = 0; j < grad.rows(); ++j) {
    const int c = labels.label[j];
    const double x = grad(j, c);
    // Below the clamp the loss is flat.
    if (x < kProbEpsilon) {
      grad.row(j).setZero();
      continue;
    }
    grad(j, c) -= 1.0;
    grad.row(j) *= multiplier(labels, j, cfg) / n;
  }
  return grad;
}

void refine_backward(const Matrix& features, const Matrix& logit_grad, int head, MidModel& grad) {
  check_head(grad, head);
  grad.ref_weight[head - 1].noalias() += features.transpose() * logit_grad;
  grad.ref_bias[head - 1] += logit_grad.colwise().sum().transpose();
}

Matrix detection_scores(const MidModel& model, const Matrix& features) {
  Matrix acc = refine_forward(model, 1, features);
  for (int k = 2; k <= model.num_heads; ++k) acc += refine_forward(model, k, features);
  return acc / static_cast<double>(model.num_heads);
}

Matrix with_background_column(const Matrix& proposal_scores) {
  Matrix out = Matrix::Zero(proposal_scores.rows(), proposal_scores.cols() + 1);
  out.rightCols(proposal_scores.cols()) = proposal_scores;
  return out;
}

}  // namespace oim
