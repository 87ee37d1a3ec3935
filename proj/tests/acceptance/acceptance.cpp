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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oim/cli.hpp"
#include "oim/eval.hpp"
#include "oim/geometry.hpp"
#include "oim/mil_head.hpp"
#include "oim/mining.hpp"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"
#include "oracles.hpp"

using namespace oim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

Outcome geometry_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(1, 50);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  int mismatches = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int n = count(rng);
    std::vector<testing::IntBox> ib;
    std::vector<BoxF> boxes;
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      ib.push_back(testing::random_int_box(rng));
      boxes.push_back(ib.back().to_box());
      // Coarse scores so that ties occur.
      scores.push_back(std::round(score(rng) * 20) / 20);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) mismatches += iou(boxes[i], boxes[j]) != testing::rational_iou(ib[i], ib[j]);
    }
    const double thr = inst % 3 == 0 ? 0.3 : inst % 3 == 1 ? 0.5 : 0.7;
    mismatches += nms(boxes, scores, thr) != testing::brute_force_nms(ib, scores, thr);
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0, fmt("%.0f mismatches, %.2f s", mismatches, secs)};
}

Outcome distance_fixtures() {
  int bad = 0;
  Vector a(3), b(3);
  a << 1, 2, 3;
  b << 4, 6, 3;
  bad += !rel_close(appearance_distance(a, b), 5.0, 1e-12);
  Vector c(4), d(4);
  c << 0.5, -1.5, 2.0, 0.0;
  d << -0.5, 0.5, 0.0, 1.0;
  bad += !rel_close(appearance_distance(c, d), std::sqrt(1.0 + 4.0 + 4.0 + 1.0), 1e-12);
  bad += appearance_distance(a, a) != 0.0;

  // Core 0 with spatial neighbours at distances 3 and 4.
  const ProposalSet ps = testing::make_proposals({{0, 0, 10, 10}, {0, 0, 10, 9}, {0, 0, 9, 9}, {50, 50, 60, 60}},
                                                 {{0, 0}, {3, 0}, {0, 4}, {1, 1}}, {0.9, 0.5, 0.4, 0.3});
  MiningConfig cfg;
  const SpatialGraph g = build_spatial_graph(ps, 0, cfg);
  bad += g.nodes != std::vector<int>{0, 1, 2};
  bad += !rel_close(average_graph_distance(ps, g, cfg), 7.0 / 3.0, 1e-12);
  cfg.include_core_in_davg = false;
  bad += !rel_close(average_graph_distance(ps, g, cfg), 3.5, 1e-12);
  return {bad == 0, fmt("%.0f fixture mismatches", bad)};
}

Outcome algorithm_trace() {
  // Core 0; neighbours 1 and 2 at distances 1 and 2 give D_avg = 1.
  // With alpha = 2: proposal 1 (D = 1) passes the gate but overlaps the core,
  // proposal 3 (D = 1.5) is accepted, proposal 2 (D = 2) fails the gate.
  const ProposalSet ps = testing::make_proposals(
      {{0, 0, 10, 10}, {0, 0, 10, 9}, {0, 0, 9, 10}, {100, 100, 110, 110}, {200, 200, 210, 210}},
      {{0.0}, {1.0}, {2.0}, {1.5}, {2.5}}, {0.9, 0.6, 0.5, 0.4, 0.3});
  MiningConfig cfg;
  cfg.alpha = 2.0;
  const AppearanceGraph g = mine_instances(ps, 1, cfg);
  bool ok = g.core == 0 && g.d_avg == 1.0 && g.nodes == std::vector<int>{0, 3} && g.spatial.size() == 2 &&
            g.spatial[0].nodes == std::vector<int>{0, 1, 2} && g.spatial[1].nodes == std::vector<int>{3};
  // Overlap exclusion exercised: proposal 1 is closer than 3 and within the gate.
  const bool overlap_branch = appearance_distance(ps.features.row(1).transpose(), ps.features.row(0).transpose()) <
                                  cfg.alpha * g.d_avg &&
                              iou(ps.boxes[0], ps.boxes[1]) > 0.0;
  // Gate exercised: proposal 2 is not overlapping-accepted-only; it fails D < alpha * D_avg.
  const bool gate_branch = !(2.0 < cfg.alpha * g.d_avg);
  ok = ok && overlap_branch && gate_branch;
  return {ok, ok ? "V^a = {0, 3}, spatial {0, 1, 2} and {3}" : "trace differs from the fixture"};
}

bool subset(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

Outcome alpha_monotonicity() {
  SynthConfig sc;
  sc.num_images = 200;
  sc.seed = 11;
  Dataset ds = generate(sc);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int violations = 0, checks = 0;
  MiningConfig lo, hi;
  lo.alpha = 2.0;
  hi.alpha = 5.0;
  for (int pass = 0; pass < 2; ++pass) {
    if (pass == 0) {
      apply_oracle_scores(ds);
    } else {
      for (auto& s : ds.images) {
        for (Eigen::Index i = 0; i < s.proposals.scores.rows(); ++i)
          for (Eigen::Index j = 0; j < s.proposals.scores.cols(); ++j) s.proposals.scores(i, j) = u(rng);
      }
    }
    for (const auto& s : ds.images) {
      for (int c : s.proposals.active_classes()) {
        ++checks;
        violations += !subset(mine_instances(s.proposals, c, lo).nodes, mine_instances(s.proposals, c, hi).nodes);
      }
    }
  }
  return {violations == 0, fmt("%.0f violations over %.0f (image, class) pairs", violations, checks)};
}

Outcome gradient_identity() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> n(0.0, 1.5);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  const LossConfig cfg{0.2, true};
  double worst_identity = 0.0, worst_fd = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int rows = 3 + t % 8, cols = 3 + t % 4;
    Matrix logits(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) logits(i, j) = n(rng);
    PseudoLabels pl;
    for (int j = 0; j < rows; ++j) {
      pl.label.push_back(static_cast<int>(rng() % cols));
      pl.weight.push_back(w(rng));
      pl.is_core.push_back(rng() % 3 == 0 ? 1 : 0);
      pl.owner.push_back(-1);
    }
    const Matrix g4 = refinement_loss_grad(logits, pl, cfg);
    const Matrix g3 = testing::unweighted_refinement_grad(logits, pl.label, pl.weight);
    for (int j = 0; j < rows; ++j) {
      const double factor = pl.is_core[j] ? cfg.beta : 1.0 + cfg.beta;
      worst_identity = std::max(worst_identity, testing::relative_error(g4.row(j), factor * g3.row(j)));
    }
    const Matrix fd = testing::finite_difference(
        logits, [&](const Matrix& z) { return refinement_loss(softmax_rows(z), pl, cfg); });
    worst_fd = std::max(worst_fd, testing::relative_error(g4, fd));
  }
  return {worst_identity <= 1e-12 && worst_fd <= 1e-5,
          fmt("row identity %.2e, finite differences %.2e", worst_identity, worst_fd)};
}

Outcome metric_oracles() {
  GtIndex one, two;
  one["a"] = {{{0, 0, 10, 10}, 1}};
  two["a"] = {{{0, 0, 10, 10}, 1}, {{50, 50, 60, 60}, 1}};
  const std::vector<Detection> hit{{"a", 1, {0, 0, 10, 10}, 0.9}};
  const double ap1 = *average_precision(hit, one, 1);
  const double ap611 = *average_precision(hit, two, 1);

  GtIndex gt;
  gt["a"] = {{{0, 0, 10, 10}, 1}, {{20, 0, 30, 10}, 2}};
  gt["b"] = {{{5, 5, 15, 15}, 1}, {{40, 40, 80, 90}, 1}};
  std::vector<Detection> perfect;
  for (const auto& [id, inst] : gt)
    for (const auto& g : inst) perfect.push_back({id, g.class_id, g.box, 1.0});
  const MetricsReport r = evaluate_detections(perfect, gt, 2);
  const bool ok = std::abs(ap1 - 1.0) <= 1e-12 && std::abs(ap611 - 6.0 / 11.0) <= 1e-12 && r.mean_ap &&
                  *r.mean_ap == 1.0 && r.corloc && *r.corloc == 1.0;
  return {ok, fmt("AP %.12f and %.12f, perfect mAP %.3f CorLoc %.3f", ap1, ap611, r.mean_ap.value_or(-1),
                  r.corloc.value_or(-1))};
}

Outcome mining_recall() {
  const auto t0 = Clock::now();
  auto run = [] {
    Dataset ds = generate(SynthConfig{});
    apply_oracle_scores(ds);
    std::vector<std::vector<AppearanceGraph>> full, core;
    for (const auto& s : ds.images) {
      full.push_back(mine_all(s.proposals, MiningConfig{}, MiningStrategy::kFull));
      core.push_back(mine_all(s.proposals, MiningConfig{}, MiningStrategy::kCoreSpatial));
    }
    return std::make_pair(instance_recall(ds, full), instance_recall(ds, core));
  };
  const auto first = run();
  const auto second = run();
  const double secs = seconds_since(t0) / 2;
  const bool ok = first.first >= 0.9 && first.second <= 0.5 && first == second && secs < 30.0;
  return {ok, fmt("OIM %.3f, core-only %.3f, repeat identical %.0f, %.2f s", first.first, first.second,
                  first == second, secs)};
}

Outcome ablation_ordering() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  const Dataset train_set = generate(sc);
  SynthConfig held_out = sc;
  held_out.seed = sc.seed + 1000;
  const Dataset eval_set = generate(held_out);
  TrainConfig base;
  base.threads = std::max(1u, std::thread::hardware_concurrency());
  const AblationReport rep =
      ablation_suite(train_set, eval_set, base, {AblationMode::kBaseline, AblationMode::kOim, AblationMode::kOimIr},
                     {1, 2, 3, 4, 5});
  const double secs = seconds_since(t0);
  const AblationRow* b = rep.find(AblationMode::kBaseline);
  const AblationRow* o = rep.find(AblationMode::kOim);
  const AblationRow* r = rep.find(AblationMode::kOimIr);
  const bool ok = r->median_map > o->median_map && o->median_map > b->median_map &&
                  o->median_recall >= 2.0 * b->median_recall && secs < 600.0;
  std::string detail = fmt("median mAP baseline %.4f, oim %.4f, oim_ir %.4f", b->median_map, o->median_map,
                           r->median_map);
  detail += fmt("; median recall oim %.3f vs baseline %.3f; %.1f s", o->median_recall, b->median_recall, secs);
  return {ok, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "oim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
  testing::TempDir tmp("acceptance");
  const std::string root = tmp.path().string();
  int failures = 0;
  std::vector<std::string> dirs;
  for (const char* run : {"a", "b"}) {
    for (const char* threads : {"1", "4"}) {
      const std::string dir = root + "/" + run + threads;
      dirs.push_back(dir);
      failures += cli({"--seed", "7", "--threads", threads, "--out-dir", dir, "generate", "--images", "40"}) != 0;
      const std::string data = dir + "/dataset.jsonl";
      failures += cli({"--seed", "7", "--threads", threads, "--out-dir", dir, "train", "--dataset", data,
                       "--iterations", "150"}) != 0;
      failures += cli({"--seed", "7", "--threads", threads, "--out-dir", dir, "evaluate", "--dataset", data,
                       "--checkpoint", dir + "/checkpoint.txt"}) != 0;
    }
  }
  int differing = 0;
  for (const char* f : {"dataset.jsonl", "checkpoint.txt", "trace.jsonl", "metrics.json", "detections.jsonl"}) {
    const std::string ref = slurp(fs::path(dirs[0]) / f);
    failures += ref.empty();
    for (std::size_t i = 1; i < dirs.size(); ++i) differing += slurp(fs::path(dirs[i]) / f) != ref;
  }
  return {failures == 0 && differing == 0,
          fmt("%.0f command failures, %.0f differing artifacts over 2 runs x 2 thread settings", failures,
              differing)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometry oracle equivalence", geometry_oracle},
      {"distance fixtures", distance_fixtures},
      {"mining trace fidelity", algorithm_trace},
      {"alpha monotonicity", alpha_monotonicity},
      {"gradient scaling identity", gradient_identity},
      {"metric oracles", metric_oracles},
      {"mining-alone recall", mining_recall},
      {"end-to-end ablation ordering", ablation_ordering},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
