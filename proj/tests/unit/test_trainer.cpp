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


#include <algorithm>
#include <atomic>
#include <mutex>

#include "doctest.h"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"

using namespace oim;

namespace {

Dataset small_synth(int images, std::uint64_t seed = 7) {
  SynthConfig sc;
  sc.seed = seed;
  sc.num_images = images;
  return generate(sc);
}

TrainConfig quick(int iterations, AblationMode mode = AblationMode::kOimIr) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.mode = mode;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("schedule switches at the configured fractions") {
    TrainConfig cfg = quick(90);
    CHECK(cfg.lr_switch_iteration() == 40);
    CHECK(cfg.alpha_switch_iteration() == 70);
    CHECK(cfg.lr_at(39) == cfg.lr1);
    CHECK(cfg.lr_at(40) == cfg.lr2);
    CHECK(cfg.alpha_at(69) == 5.0);
    CHECK(cfg.alpha_at(70) == 2.0);
    CHECK(cfg.mining_at(80).alpha == 2.0);
  }

  TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.lr_switch = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.lr1 = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.num_heads = 6;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK_NOTHROW(TrainConfig{}.validate());
  }

  TEST_CASE("ablation modes round-trip through their names") {
    for (AblationMode m : kAllModes) CHECK(parse_ablation_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_ablation_mode("oicr"), ValidationError);
    CHECK(mode_spec(AblationMode::kBaseline).strategy == MiningStrategy::kCoreSpatial);
    CHECK_FALSE(mode_spec(AblationMode::kBaseline).reweight);
    CHECK(mode_spec(AblationMode::kIrOnly).reweight);
    CHECK(mode_spec(AblationMode::kOimIr).strategy == MiningStrategy::kFull);
  }

  TEST_CASE("zero iterations return the initial model") {
    const Dataset ds = small_synth(3);
    const TrainResult r = train(ds, quick(0));
    CHECK(r.trace.empty());
    const TrainResult again = train(ds, quick(0));
    CHECK(r.model == again.model);
    const TrainResult one = train(ds, quick(1));
    CHECK_FALSE(one.model == r.model);
  }

  TEST_CASE("image loss decreases on a single separable image") {
    SynthConfig sc;
    sc.num_images = 1;
    sc.part_confound_strength = 0.0;
    const Dataset ds = generate(sc);
    TrainConfig cfg = quick(200);
    cfg.batch_size = 1;
    const TrainResult r = train(ds, cfg);
    REQUIRE(r.trace.size() >= 10);
    for (int i = 1; i < 10; ++i) CHECK(r.trace[i].loss_ce < r.trace[i - 1].loss_ce);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].iteration > r.trace[i - 1].iteration);
  }

  TEST_CASE("training is deterministic and independent of the thread count") {
    const Dataset ds = small_synth(12);
    TrainConfig cfg = quick(60);
    const TrainResult a = train(ds, cfg);
    const TrainResult b = train(ds, cfg);
    cfg.threads = 4;
    cfg.batch_size = 4;
    const TrainResult c = train(ds, cfg);
    cfg.threads = 1;
    const TrainResult d = train(ds, cfg);
    CHECK(a.model == b.model);
    CHECK(c.model == d.model);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(a.trace[i].loss_ce == b.trace[i].loss_ce);
      CHECK(a.trace[i].loss_oir == b.trace[i].loss_oir);
      CHECK(a.trace[i].images == b.trace[i].images);
    }
  }

  TEST_CASE("mining hooks see the alpha schedule and the ablation strategy") {
    const Dataset ds = small_synth(6);
    for (AblationMode mode : kAllModes) {
      TrainConfig cfg = quick(45, mode);
      std::vector<MiningEvent> events;
      TrainHooks hooks{[&](const MiningEvent& e) { events.push_back(e); }};
      train(ds, cfg, hooks);
      REQUIRE_FALSE(events.empty());
      for (const auto& e : events) {
        CHECK(e.alpha == (e.iteration < cfg.alpha_switch_iteration() ? cfg.alpha1 : cfg.alpha2));
        CHECK(e.strategy == mode_spec(mode).strategy);
        if (mode == AblationMode::kBaseline || mode == AblationMode::kSgOnly || mode == AblationMode::kIrOnly) {
          CHECK(e.nodes == 1);
        }
      }
    }
  }

  TEST_CASE("baseline mines one spatial graph per active class") {
    const Dataset ds = small_synth(5);
    const MidModel model = train(ds, quick(20, AblationMode::kBaseline)).model;
    for (const auto& s : ds.images) {
      const auto graphs = mine_with_model(model, s.proposals, 1, MiningConfig{}, MiningStrategy::kCoreSpatial);
      CHECK(graphs.size() == s.proposals.active_classes().size());
      for (const auto& g : graphs) {
        CHECK(g.nodes.size() == 1);
        CHECK(g.spatial.size() == 1);
      }
    }
  }

  TEST_CASE("divergence is reported as a runtime failure") {
    const Dataset ds = small_synth(2);
    TrainConfig cfg = quick(5);
    cfg.lr1 = cfg.lr2 = 1e308;
    CHECK_THROWS_AS(train(ds, cfg), RuntimeFailure);
  }

  TEST_CASE("mismatched images are rejected") {
    Dataset ds = small_synth(2);
    ds.images[1].proposals.features.conservativeResize(Eigen::NoChange, ds.feature_dim - 1);
    CHECK_THROWS_AS(train(ds, quick(3)), ValidationError);
  }

  TEST_CASE("instance mining recall beats core-only mining on two-instance scenes") {
    SynthConfig sc;
    sc.num_images = 30;
    sc.max_active_classes = 1;
    sc.instance_weights = {0.0, 1.0, 0.0, 0.0};
    const Dataset ds = generate(sc);
    std::vector<double> base, oim;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      TrainConfig cfg = quick(400, AblationMode::kBaseline);
      cfg.seed = seed;
      base.push_back(train(ds, cfg).trace.back().instance_recall.value());
      cfg.mode = AblationMode::kOim;
      oim.push_back(train(ds, cfg).trace.back().instance_recall.value());
    }
    CHECK(median(oim) >= 2.0 * median(base));
  }

  TEST_CASE("ablation suite report structure") {
    const Dataset ds = small_synth(4);
    const std::vector<AblationMode> modes{AblationMode::kBaseline, AblationMode::kOim, AblationMode::kOimIr};
    const AblationReport report = ablation_suite(ds, ds, quick(10), modes, {1, 2, 3, 4, 5});
    REQUIRE(report.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(report.rows[i].mode == modes[i]);
      REQUIRE(report.rows[i].runs.size() == 5);
      std::vector<double> maps;
      for (const auto& r : report.rows[i].runs) maps.push_back(r.mean_ap);
      CHECK(report.rows[i].median_map == median(maps));
    }
    CHECK(report.find(AblationMode::kOim) == &report.rows[1]);
    CHECK(report.find(AblationMode::kAgOnly) == nullptr);
  }

  TEST_CASE("median") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({}) == 0.0);
  }
}
