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

#include "oim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oim/parallel.hpp"

namespace oim {

const char* to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::kBaseline: return "baseline";
    case AblationMode::kSgOnly: return "sg_only";
    case AblationMode::kAgOnly: return "ag_only";
    case AblationMode::kOim: return "oim";
    case AblationMode::kIrOnly: return "ir_only";
    case AblationMode::kOimIr: return "oim_ir";
  }
  return "unknown";
}

AblationMode parse_ablation_mode(const std::string& name) {
  for (AblationMode m : kAllModes) {
    if (name == to_string(m)) return m;
  }
  throw ValidationError("unknown ablation mode '" + name + "'");
}

ModeSpec mode_spec(AblationMode mode) {
  switch (mode) {
    case AblationMode::kBaseline: return {MiningStrategy::kCoreSpatial, false};
    case AblationMode::kSgOnly: return {MiningStrategy::kCoreSpatial, false};
    case AblationMode::kAgOnly: return {MiningStrategy::kAppearanceOnly, false};
    case AblationMode::kOim: return {MiningStrategy::kFull, false};
    case AblationMode::kIrOnly: return {MiningStrategy::kCoreSpatial, true};
    case AblationMode::kOimIr: return {MiningStrategy::kFull, true};
  }
  throw ValidationError("unknown ablation mode");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("train config: " + msg); };
  if (iterations < 0) fail("iterations must be non-negative");
  if (!(lr1 > 0.0 && lr2 > 0.0)) fail("learning rates must be positive");
  if (!(lr_switch > 0.0 && lr_switch < 1.0)) fail("lr_switch must lie in (0, 1)");
  if (!(alpha_switch > 0.0 && alpha_switch < 1.0)) fail("alpha_switch must lie in (0, 1)");
  if (!(alpha1 > 0.0 && alpha2 > 0.0)) fail("alpha values must be positive");
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) fail("T must lie in (0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) fail("beta must lie in [0, 1)");
  if (num_heads < 1 || num_heads > 5) fail("K must lie in 1..5");
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(init_scale >= 0.0)) fail("init_scale must be non-negative");
  if (!(feature_noise >= 0.0)) fail("feature_noise must be non-negative");
  if (log_every < 1) fail("log_every must be positive");
  if (threads < 1) fail("threads must be positive");
  if (eval_top_k < 1) fail("eval_top_k must be positive");
  if (!(eval_nms >= 0.0 && eval_nms <= 1.0)) fail("eval_nms must lie in [0, 1]");
}

int TrainConfig::alpha_switch_iteration() const {
  return static_cast<int>(std::floor(alpha_switch * iterations));
}

int TrainConfig::lr_switch_iteration() const {
  return static_cast<int>(std::floor(lr_switch * iterations));
}

double TrainConfig::alpha_at(int iteration) const {
  return iteration < alpha_switch_iteration() ? alpha1 : alpha2;
}

double TrainConfig::lr_at(int iteration) const {
  return iteration < lr_switch_iteration() ? lr1 : lr2;
}

MiningConfig TrainConfig::mining_at(int iteration) const {
  return {iou_threshold, alpha_at(iteration), include_core_in_davg};
}

LossConfig TrainConfig::loss() const { return {beta, mode_spec(mode).reweight}; }

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_dataset(const Dataset& dataset) {
  for (const auto& s : dataset.images) {
    require_valid(s.proposals);
    if (s.proposals.feature_dim() != dataset.feature_dim ||
        s.proposals.num_classes() != dataset.num_classes) {
      throw ValidationError("image '" + s.proposals.image_id +
                            "' disagrees with the dataset's feature dimension or class count");
    }
  }
}

struct ImageStep {
  MidModel grad;
  double loss_ce = 0.0;
  std::vector<double> loss_oir;
  int mined = 0;
  RecallCount recall;
  std::vector<MiningEvent> events;
};

void require_finite(double value, int iteration, const std::string& image, int head) {
  if (std::isfinite(value)) return;
  std::ostringstream os;
  os << "non-finite loss at iteration " << iteration << ", image '" << image << "', "
     << (head == 0 ? std::string("MID head") : "refinement head " + std::to_string(head));
  throw RuntimeFailure(os.str());
}

ImageStep image_step(const MidModel& model, const Sample& sample, const TrainConfig& cfg,
                     int iteration, std::size_t image_index) {
  ImageStep out;
  out.grad = MidModel::zeros_like(model);
  ProposalSet work = sample.proposals;
  if (cfg.feature_noise > 0.0) {
    std::mt19937_64 rng(mix(mix(cfg.seed, static_cast<std::uint64_t>(iteration)), image_index));
    std::normal_distribution<double> noise(0.0, cfg.feature_noise);
    for (Eigen::Index i = 0; i < work.features.size(); ++i) work.features.data()[i] += noise(rng);
  }

  const MidForward fwd = mid_forward(model, work.features);
  out.loss_ce = mid_backward(model, work.features, fwd, work.image_labels, out.grad);
  require_finite(out.loss_ce, iteration, work.image_id, 0);

  const ModeSpec spec = mode_spec(cfg.mode);
  const MiningConfig mining = cfg.mining_at(iteration);
  const LossConfig loss_cfg = cfg.loss();
  work.scores = with_background_column(fwd.proposal_scores);
  for (int k = 1; k <= model.num_heads; ++k) {
    const auto graphs = mine_all(work, mining, spec.strategy);
    for (const auto& g : graphs) {
      out.events.push_back({iteration, k, work.image_id, g.class_id, mining.alpha, spec.strategy,
                            static_cast<int>(g.nodes.size())});
    }
    const PseudoLabels labels = assign_pseudo_labels(work, graphs);
    const Matrix logits = refine_logits(model, k, work.features);
    const Matrix probs = softmax_rows(logits);
    const double loss = refinement_loss(probs, labels, loss_cfg);
    require_finite(loss, iteration, work.image_id, k);
    out.loss_oir.push_back(loss);
    refine_backward(work.features, refinement_loss_grad(logits, labels, loss_cfg), k, out.grad);

    if (k == model.num_heads) {
      for (const auto& g : graphs) out.mined += static_cast<int>(g.nodes.size());
      if (sample.has_gt) out.recall = instance_recall_counts(work, sample.gt, graphs);
    }
    work.scores = probs;
  }
  return out;
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset.feature_dim < 1 || dataset.num_classes < 1) {
    throw ValidationError("train: dataset has no feature dimension or classes");
  }
  TrainResult result;
  result.model = MidModel::create(dataset.feature_dim, dataset.num_classes, cfg.num_heads,
                                  mix(cfg.seed, 0x1417ULL), cfg.init_scale);
  if (cfg.iterations == 0) return result;
  if (dataset.empty()) throw ValidationError("train: dataset is empty");
  check_dataset(dataset);

  std::mt19937_64 order_rng(mix(cfg.seed, 0x0bdeULL));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), order_rng);
  std::size_t cursor = 0;

  const int log_every = std::max(1, cfg.log_every);
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::vector<ImageStep> steps(batch.size());
    parallel_for(batch.size(), cfg.threads, [&](std::size_t b) {
      steps[b] = image_step(result.model, dataset.images[batch[b]], cfg, it, batch[b]);
    });

    MidModel grad = MidModel::zeros_like(result.model);
    for (const auto& s : steps) grad.add_scaled(s.grad, 1.0 / static_cast<double>(steps.size()));
    result.model.add_scaled(grad, -cfg.lr_at(it));
    if (!result.model.all_finite()) {
      throw RuntimeFailure("non-finite parameters after iteration " + std::to_string(it));
    }

    if (hooks.on_mine) {
      for (const auto& s : steps) {
        for (const auto& e : s.events) hooks.on_mine(e);
      }
    }

    if (it % log_every == 0 || it + 1 == cfg.iterations) {
      TraceRecord rec;
      rec.iteration = it;
      rec.lr = cfg.lr_at(it);
      rec.alpha = cfg.alpha_at(it);
      rec.loss_oir.assign(cfg.num_heads, 0.0);
      RecallCount recall;
      bool any_gt = false;
      for (std::size_t b = 0; b < steps.size(); ++b) {
        rec.images.push_back(dataset.images[batch[b]].proposals.image_id);
        rec.mined_instances.push_back(steps[b].mined);
        rec.loss_ce += steps[b].loss_ce / static_cast<double>(steps.size());
        for (int k = 0; k < cfg.num_heads; ++k) {
          rec.loss_oir[k] += steps[b].loss_oir[k] / static_cast<double>(steps.size());
        }
        recall += steps[b].recall;
        any_gt = any_gt || dataset.images[batch[b]].has_gt;
      }
      if (any_gt) rec.instance_recall = recall.fraction();
      result.trace.push_back(std::move(rec));
    }
  }
  return result;
}

Matrix mining_scores(const MidModel& model, int head, const Matrix& features) {
  if (head < 1 || head > model.num_heads) {
    throw ValidationError("mining_scores: head outside 1..K");
  }
  if (head == 1) return with_background_column(mid_forward(model, features).proposal_scores);
  return refine_forward(model, head - 1, features);
}

std::vector<AppearanceGraph> mine_with_model(const MidModel& model, const ProposalSet& ps,
                                             int head, const MiningConfig& cfg,
                                             MiningStrategy strategy) {
  ProposalSet work = ps;
  work.scores = mining_scores(model, head, ps.features);
  return mine_all(work, cfg, strategy);
}

std::vector<Detection> detect(const MidModel& model, const Dataset& dataset, int top_k,
                              double nms_iou, int threads) {
  std::vector<std::vector<Detection>> per_image(dataset.size());
  parallel_for(dataset.size(), threads, [&](std::size_t i) {
    const auto& ps = dataset.images[i].proposals;
    per_image[i] = detections_from_scores(ps, detection_scores(model, ps.features), top_k, nms_iou);
  });
  std::vector<Detection> out;
  for (auto& v : per_image) out.insert(out.end(), v.begin(), v.end());
  return out;
}

MetricsReport evaluate_model(const MidModel& model, const Dataset& dataset,
                             const TrainConfig& cfg) {
  const auto dets = detect(model, dataset, cfg.eval_top_k, cfg.eval_nms, cfg.threads);
  MetricsReport report =
      evaluate_detections(dets, index_ground_truth(dataset), dataset.num_classes);

  const MiningConfig mining = cfg.mining_at(std::max(0, cfg.iterations - 1));
  const MiningStrategy strategy = mode_spec(cfg.mode).strategy;
  std::vector<RecallCount> counts(dataset.size());
  parallel_for(dataset.size(), cfg.threads, [&](std::size_t i) {
    const auto& s = dataset.images[i];
    if (!s.has_gt || s.proposals.active_classes().empty()) return;
    const auto graphs = mine_with_model(model, s.proposals, model.num_heads, mining, strategy);
    counts[i] = instance_recall_counts(s.proposals, s.gt, graphs);
  });
  RecallCount total;
  for (const auto& c : counts) total += c;
  if (total.total > 0) report.instance_recall = total.fraction();
  return report;
}

const AblationRow* AblationReport::find(AblationMode mode) const {
  for (const auto& r : rows) {
    if (r.mode == mode) return &r;
  }
  return nullptr;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AblationReport ablation_suite(const Dataset& train_set, const Dataset& eval_set,
                              const TrainConfig& base, const std::vector<AblationMode>& modes,
                              const std::vector<std::uint64_t>& seeds) {
  AblationReport report;
  for (AblationMode mode : modes) {
    AblationRow row{mode, {}, 0.0, 0.0, 0.0};
    std::vector<double> maps, corlocs, recalls;
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.mode = mode;
      cfg.seed = seed;
      const TrainResult trained = train(train_set, cfg);
      const MetricsReport on_eval = evaluate_model(trained.model, eval_set, cfg);
      const MetricsReport on_train =
          &eval_set == &train_set ? on_eval : evaluate_model(trained.model, train_set, cfg);
      AblationRun run{seed, on_eval.mean_ap.value_or(0.0), on_eval.corloc.value_or(0.0),
                      on_train.instance_recall.value_or(0.0)};
      maps.push_back(run.mean_ap);
      corlocs.push_back(run.corloc);
      recalls.push_back(run.instance_recall);
      row.runs.push_back(run);
    }
    row.median_map = median(maps);
    row.median_corloc = median(corlocs);
    row.median_recall = median(recalls);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace oim
