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


#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oim/io.hpp"
#include "oim/synth.hpp"
#include "oracles.hpp"

using namespace oim;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset parse(const std::string& text, std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  return parse_dataset(in, warnings);
}

const char* kRecord1 =
    R"({"image_id":"a","width":100,"height":80,"labels":[2],"proposals":[{"box":[0,0,10,10],"feature":[1,2,3]},{"box":[5,5,20,20],"feature":[0,0,1]}],"gt":[{"box":[0,0,10,10],"class":2}]})";
const char* kRecord2 =
    R"({"image_id":"b","width":100,"height":80,"labels":[1],"proposals":[{"box":[0,0,10,10],"feature":[1,2]}]})";

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("empty file gives an empty dataset and a warning") {
    std::vector<std::string> warnings;
    const Dataset ds = parse("", &warnings);
    CHECK(ds.empty());
    CHECK(warnings.size() == 1);
  }

  TEST_CASE("a minimal record parses") {
    const Dataset ds = parse(std::string(kRecord1) + "\n");
    REQUIRE(ds.size() == 1);
    CHECK(ds.num_classes == 2);
    CHECK(ds.feature_dim == 3);
    const ProposalSet& ps = ds.images[0].proposals;
    CHECK(ps.image_labels == std::vector<std::uint8_t>{0, 1});
    CHECK(ps.boxes[1] == BoxF{5, 5, 20, 20});
    CHECK(ps.features(0, 2) == 3.0);
    CHECK(ds.images[0].has_gt);
    CHECK(ds.images[0].gt[0].class_id == 2);
  }

  TEST_CASE("feature length must match the first record") {
    CHECK_THROWS_WITH_AS(parse(std::string(kRecord1) + "\n" + kRecord2 + "\n"),
                         doctest::Contains("line 2"), ValidationError);
    CHECK_THROWS_WITH_AS(parse(std::string(kRecord1) + "\n" + kRecord2 + "\n"),
                         doctest::Contains("proposals[0].feature"), ValidationError);
  }

  TEST_CASE("errors cite line and field") {
    const std::string good(kRecord1);
    CHECK_THROWS_WITH_AS(parse(good + "\n\n{not json\n"), doctest::Contains("line 3"), ValidationError);
    CHECK_THROWS_WITH_AS(parse(R"({"image_id":"x","width":10,"height":10,"labels":[1]})"),
                         doctest::Contains("proposals"), ValidationError);
    CHECK_THROWS_WITH_AS(
        parse(R"({"image_id":"x","width":10,"height":10,"labels":[1],"proposals":[{"box":[5,0,5,10],"feature":[1]}]})"),
        doctest::Contains("degenerate"), ValidationError);
    CHECK_THROWS_WITH_AS(
        parse(R"({"image_id":"x","width":10,"height":10,"num_classes":2,"labels":[3],"proposals":[{"box":[0,0,5,10],"feature":[1]}]})"),
        doctest::Contains("line 1"), ValidationError);
  }

  TEST_CASE("save then load is the identity on the default synthetic dataset") {
    testing::TempDir dir("io");
    const Dataset ds = generate(SynthConfig{});
    save_dataset(dir / "d.jsonl", ds);
    const Dataset back = load_dataset(dir / "d.jsonl");
    REQUIRE(back.size() == ds.size());
    CHECK(back.num_classes == ds.num_classes);
    CHECK(back.feature_dim == ds.feature_dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& a = ds.images[i];
      const auto& b = back.images[i];
      CHECK(a.proposals.image_id == b.proposals.image_id);
      CHECK(a.proposals.boxes == b.proposals.boxes);
      CHECK(a.proposals.features == b.proposals.features);
      CHECK(a.proposals.image_labels == b.proposals.image_labels);
      CHECK(a.gt == b.gt);
    }
    save_dataset(dir / "again.jsonl", back);
    CHECK(read_file(dir / "d.jsonl") == read_file(dir / "again.jsonl"));
  }

  TEST_CASE("scores and detections round-trip") {
    testing::TempDir dir("io");
    SynthConfig sc;
    sc.num_images = 4;
    Dataset ds = generate(sc);
    apply_oracle_scores(ds);
    save_scores(dir / "s.jsonl", ds);
    Dataset other = generate(sc);
    attach_scores(other, load_scores(dir / "s.jsonl"));
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(other.images[i].proposals.scores == ds.images[i].proposals.scores);

    ScoreTable bad = load_scores(dir / "s.jsonl");
    bad.begin()->second.conservativeResize(Eigen::NoChange, 2);
    CHECK_THROWS_AS(attach_scores(other, bad), ValidationError);

    const std::vector<Detection> dets{{"a", 1, {0.5, 1.25, 10, 20}, 0.123456789012345}, {"b", 3, {1, 2, 3, 4}, 1.0}};
    save_detections(dir / "d.jsonl", dets);
    CHECK(load_detections(dir / "d.jsonl") == dets);
  }

  TEST_CASE("checkpoints round-trip bit for bit") {
    testing::TempDir dir("io");
    const MidModel m = MidModel::create(7, 3, 2, 99, 0.37);
    save_checkpoint(dir / "m.txt", m);
    CHECK(load_checkpoint(dir / "m.txt") == m);

    std::istringstream wrong("not-a-checkpoint\n");
    CHECK_THROWS_AS(read_checkpoint(wrong), ValidationError);
    std::string text = read_file(dir / "m.txt");
    text.resize(text.size() / 2);
    std::istringstream truncated(text);
    CHECK_THROWS_AS(read_checkpoint(truncated), ValidationError);
  }

  TEST_CASE("shortest double formatting round-trips") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
      CHECK(std::stod(format_double(x)) == x);
    }
  }

  TEST_CASE("metrics document layout") {
    MetricsReport r;
    r.per_class[1] = {2, 1, 0.5, std::nullopt};
    r.mean_ap = 0.5;
    const auto doc = nlohmann::json::parse(metrics_to_json(r));
    CHECK(doc["mAP"] == 0.5);
    CHECK(doc["CorLoc"].is_null());
    CHECK(doc["instance_recall"].is_null());
    CHECK(doc["per_class"]["1"]["AP"] == 0.5);
    CHECK(doc["per_class"]["1"]["num_gt"] == 2);
  }

  TEST_CASE("trace lines are one JSON object per record") {
    std::vector<TraceRecord> trace(2);
    trace[0].iteration = 0;
    trace[0].loss_oir = {0.1, 0.2};
    trace[1].iteration = 10;
    trace[1].instance_recall = 0.75;
    std::istringstream in(trace_to_jsonl(trace));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const auto rec = nlohmann::json::parse(line);
      CHECK(rec.contains("loss_ce"));
      ++n;
    }
    CHECK(n == 2);
  }

  TEST_CASE("manifests are deterministic") {
    Manifest m{"generate", library_version(), {{"seed", "7"}}, {}, {"d.jsonl"}};
    CHECK(manifest_to_json(m) == manifest_to_json(m));
    const auto doc = nlohmann::json::parse(manifest_to_json(m));
    CHECK(doc["config"]["seed"] == "7");
    CHECK(doc["version"] == library_version());
  }

  TEST_CASE("missing input files are validation errors") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/d.jsonl"), ValidationError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.txt"), ValidationError);
  }
}
