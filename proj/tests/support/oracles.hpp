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


// Independent reference implementations used as test oracles. They favor
// obviousness over speed and share no code with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "oim/eval.hpp"
#include "oim/types.hpp"

namespace oim::testing {

// Boxes on an integer grid, so every area is an exact integer.
struct IntBox {
  std::int64_t x1, y1, x2, y2;
  BoxF to_box() const {
    return {static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(x2),
            static_cast<double>(y2)};
  }
};

// IoU as an exact fraction of integers, rounded once at the very end.
inline double rational_iou(const IntBox& a, const IntBox& b) {
  const std::int64_t area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const std::int64_t area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  if (a.x2 <= a.x1 || a.y2 <= a.y1 || b.x2 <= b.x1 || b.y2 <= b.y1) return 0.0;
  std::int64_t overlap_w = 0, overlap_h = 0;
  for (std::int64_t x = std::max(a.x1, b.x1); x < std::min(a.x2, b.x2); ++x) ++overlap_w;
  for (std::int64_t y = std::max(a.y1, b.y1); y < std::min(a.y2, b.y2); ++y) ++overlap_h;
  const std::int64_t inter = overlap_w * overlap_h;
  const std::int64_t uni = area_a + area_b - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline IntBox random_int_box(std::mt19937_64& rng, int extent = 100) {
  std::uniform_int_distribution<int> pos(0, extent), len(1, extent / 2);
  const std::int64_t x = pos(rng), y = pos(rng);
  return {x, y, x + len(rng), y + len(rng)};
}

// Greedy NMS by repeated scanning: pick the best remaining box (lowest index
// among equal scores), drop everything overlapping it by more than thr.
inline std::vector<int> brute_force_nms(const std::vector<IntBox>& boxes,
                                        const std::vector<double>& scores, double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<int> kept;
  while (true) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
      if (alive[i] && (best < 0 || scores[i] > scores[best])) best = i;
    }
    if (best < 0) break;
    kept.push_back(best);
    alive[best] = false;
    for (int i = 0; i < static_cast<int>(boxes.size()); ++i) {
      if (alive[i] && rational_iou(boxes[best], boxes[i]) > thr) alive[i] = false;
    }
  }
  return kept;
}

// Unweighted refinement loss computed proposal by proposal from logits.
inline double unweighted_refinement_loss(const Matrix& logits, const std::vector<int>& label,
                                         const std::vector<double>& weight) {
  double total = 0.0;
  const int n = static_cast<int>(logits.rows());
  for (int j = 0; j < n; ++j) {
    double mx = logits(j, 0);
    for (int k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(j, k));
    double denom = 0.0;
    for (int k = 0; k < logits.cols(); ++k) denom += std::exp(logits(j, k) - mx);
    const double p = std::exp(logits(j, label[j]) - mx) / denom;
    total += -weight[j] * std::log(std::max(p, 1e-7));
  }
  return total / n;
}

// Gradient of unweighted_refinement_loss with respect to the logits,
// written out from d(-log softmax)/dz = p - onehot.
inline Matrix unweighted_refinement_grad(const Matrix& logits, const std::vector<int>& label,
                                         const std::vector<double>& weight) {
  Matrix g(logits.rows(), logits.cols());
  const int n = static_cast<int>(logits.rows());
  for (int j = 0; j < n; ++j) {
    double mx = logits(j, 0);
    for (int k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(j, k));
    double denom = 0.0;
    for (int k = 0; k < logits.cols(); ++k) denom += std::exp(logits(j, k) - mx);
    for (int k = 0; k < logits.cols(); ++k) {
      const double p = std::exp(logits(j, k) - mx) / denom;
      g(j, k) = weight[j] / n * (p - (k == label[j] ? 1.0 : 0.0));
    }
  }
  return g;
}

template <typename F>
Matrix finite_difference(const Matrix& x, F&& f, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Matrix xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2 * h);
    }
  }
  return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// VOC AP by brute force: rank detections, walk them once with an explicit
// claimed-set per image, then evaluate the precision envelope either at the
// 11 recall points or as the exact area under the interpolated curve.
inline double brute_force_ap(std::vector<Detection> dets, const GtIndex& gt, int c, bool eleven) {
  int num_gt = 0;
  for (const auto& [id, inst] : gt) {
    for (const auto& g : inst) num_gt += g.class_id == c;
  }
  std::vector<Detection> mine;
  for (const auto& d : dets) {
    if (d.class_id == c) mine.push_back(d);
  }
  std::stable_sort(mine.begin(), mine.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<std::pair<std::string, int>> claimed;
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t r = 0; r < mine.size(); ++r) {
    const auto& d = mine[r];
    int best = -1;
    double best_iou = -1.0;
    auto it = gt.find(d.image_id);
    if (it != gt.end()) {
      for (int g = 0; g < static_cast<int>(it->second.size()); ++g) {
        if (it->second[g].class_id != c) continue;
        const BoxF& a = d.box;
        const BoxF& b = it->second[g].box;
        const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
        const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
        const double inter = iw * ih;
        const double o = inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
        if (o > best_iou) {
          best_iou = o;
          best = g;
        }
      }
    }
    const auto key = std::make_pair(d.image_id, best);
    const bool hit = best >= 0 && best_iou >= 0.5 &&
                     std::find(claimed.begin(), claimed.end(), key) == claimed.end();
    if (hit) {
      claimed.push_back(key);
      ++tp;
    }
    prec.push_back(static_cast<double>(tp) / (r + 1));
    rec.push_back(num_gt ? static_cast<double>(tp) / num_gt : 0.0);
  }
  auto envelope = [&](double r) {
    double p = 0.0;
    for (std::size_t i = 0; i < prec.size(); ++i) {
      if (rec[i] >= r) p = std::max(p, prec[i]);
    }
    return p;
  };
  if (eleven) {
    double ap = 0.0;
    for (int t = 0; t <= 10; ++t) ap += envelope(t / 10.0);
    return ap / 11.0;
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (rec[i] > prev) {
      ap += (rec[i] - prev) * envelope(rec[i]);
      prev = rec[i];
    }
  }
  return ap;
}

// Builds a ProposalSet from boxes, features (one row each) and per-proposal
// scores for a single foreground class.
inline ProposalSet make_proposals(const std::vector<BoxF>& boxes,
                                  const std::vector<std::vector<double>>& features,
                                  const std::vector<double>& class1_scores, int num_classes = 1) {
  ProposalSet ps;
  ps.image_id = "fixture";
  ps.width = 1000;
  ps.height = 1000;
  ps.boxes = boxes;
  const int n = static_cast<int>(boxes.size());
  const int d = features.empty() ? 0 : static_cast<int>(features.front().size());
  ps.features.resize(n, d);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) ps.features(j, k) = features[j][k];
  }
  ps.scores = Matrix::Zero(n, num_classes + 1);
  for (int j = 0; j < n; ++j) {
    ps.scores(j, 1) = class1_scores[j];
    ps.scores(j, 0) = 1.0 - class1_scores[j];
  }
  ps.image_labels.assign(num_classes, 0);
  ps.image_labels[0] = 1;
  return ps;
}

// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("oim_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oim::testing
