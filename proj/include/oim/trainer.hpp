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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oim/eval.hpp"
#include "oim/mil_head.hpp"
#include "oim/mining.hpp"
#include "oim/types.hpp"

namespace oim {

enum class AblationMode { kBaseline, kSgOnly, kAgOnly, kOim, kIrOnly, kOimIr };

inline constexpr AblationMode kAllModes[] = {AblationMode::kBaseline, AblationMode::kSgOnly,
                                             AblationMode::kAgOnly,   AblationMode::kOim,
                                             AblationMode::kIrOnly,   AblationMode::kOimIr};

const char* to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

struct ModeSpec {
  MiningStrategy strategy;
  bool reweight;
};
ModeSpec mode_spec(AblationMode mode);

struct TrainConfig {
  int iterations = 3000;
  double lr1 = 0.05;
  double lr2 = 0.005;
  double lr_switch = 4.0 / 9.0;     // fraction of iterations run at lr1
  double alpha1 = 5.0;
  double alpha2 = 2.0;
  double alpha_switch = 7.0 / 9.0;  // fraction of iterations mined with alpha1
  double iou_threshold = 0.5;
  bool include_core_in_davg = true;
  double beta = 0.2;
  int num_heads = 3;
  int batch_size = 2;
  std::uint64_t seed = 7;
  AblationMode mode = AblationMode::kOimIr;
  double init_scale = 0.01;
  double feature_noise = 0.0;  // optional Gaussian feature augmentation
  int log_every = 10;
  int threads = 1;
  int eval_top_k = 100;
  double eval_nms = 0.3;

  void validate() const;
  int alpha_switch_iteration() const;
  int lr_switch_iteration() const;
  double alpha_at(int iteration) const;
  double lr_at(int iteration) const;
  MiningConfig mining_at(int iteration) const;
  LossConfig loss() const;
};

struct TraceRecord {
  int iteration = 0;
  double lr = 0.0;
  double alpha = 0.0;
  std::vector<std::string> images;
  std::vector<int> mined_instances;  // appearance nodes mined for the last head
  std::optional<double> instance_recall;
  double loss_ce = 0.0;
  std::vector<double> loss_oir;  // one per refinement head
};

/// Emitted once per (image, head, class) mining call.
struct MiningEvent {
  int iteration = 0;
  int head = 0;
  std::string image_id;
  int class_id = 0;
  double alpha = 0.0;
  MiningStrategy strategy = MiningStrategy::kFull;
  int nodes = 0;
};

struct TrainHooks {
  std::function<void(const MiningEvent&)> on_mine;
};

struct TrainResult {
  MidModel model;
  std::vector<TraceRecord> trace;
};

/// SGD on L_CE + sum_k L_OIR. Refinement head k is supervised by mining
/// on the scores of head k - 1 (the MID head for k = 1). Deterministic for a
/// given (dataset, cfg); the thread count does not change the result.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Scores that supervise head `head`: MID proposal scores for head 1,
/// refinement head head - 1 otherwise. N x (C + 1).
Matrix mining_scores(const MidModel& model, int head, const Matrix& features);

/// Mining used to supervise head `head` under the trained model.
std::vector<AppearanceGraph> mine_with_model(const MidModel& model, const ProposalSet& ps,
                                             int head, const MiningConfig& cfg,
                                             MiningStrategy strategy);

std::vector<Detection> detect(const MidModel& model, const Dataset& dataset, int top_k = 100,
                              double nms_iou = 0.3, int threads = 1);

/// mAP/CorLoc of the model's detections plus the instance recall of the
/// mining that supervises the last head (final alpha of the schedule).
MetricsReport evaluate_model(const MidModel& model, const Dataset& dataset, const TrainConfig& cfg);

struct AblationRun {
  std::uint64_t seed = 0;
  double mean_ap = 0.0;
  double corloc = 0.0;
  double instance_recall = 0.0;
};

struct AblationRow {
  AblationMode mode;
  std::vector<AblationRun> runs;
  double median_map = 0.0;
  double median_corloc = 0.0;
  double median_recall = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  const AblationRow* find(AblationMode mode) const;
};

/// Trains one model per (mode, seed) on `train_set` and evaluates it on
/// `eval_set` (mAP, CorLoc) and `train_set` (instance recall).
AblationReport ablation_suite(const Dataset& train_set, const Dataset& eval_set,
                              const TrainConfig& base, const std::vector<AblationMode>& modes,
                              const std::vector<std::uint64_t>& seeds);

double median(std::vector<double> values);

}  // namespace oim
