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


#include "oim/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oim/config.hpp"
#include "oim/eval.hpp"
#include "oim/io.hpp"
#include "oim/mining.hpp"
#include "oim/render.hpp"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"

namespace oim {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = ".";
  int threads = 1;
};

// Everything a subcommand needs after the command line has been parsed.
struct Context {
  const GlobalOptions& global;
  std::ostream& out;
  std::ostream& err;
  TrainConfig train;
  SynthConfig synth;

  fs::path output(const std::string& name) const {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(global.out_dir) / p;
  }

  void write_manifest(const std::string& command, std::vector<std::string> inputs,
                      std::vector<std::string> outputs) const {
    Manifest m{command, library_version(), config_snapshot(train, synth), std::move(inputs),
               std::move(outputs)};
    save_manifest(output("manifest.json"), m);
  }

  void report(const char* fmt, double value) const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), fmt, value);
    out << buf << '\n';
  }
};

Dataset read_dataset(const Context& ctx, const std::string& path) {
  std::vector<std::string> warnings;
  Dataset ds = load_dataset(path, &warnings);
  for (const auto& w : warnings) ctx.err << "warning: " << path << ": " << w << '\n';
  return ds;
}

MiningStrategy parse_strategy(const std::string& name) {
  if (name == "full") return MiningStrategy::kFull;
  if (name == "core_spatial") return MiningStrategy::kCoreSpatial;
  if (name == "appearance_only") return MiningStrategy::kAppearanceOnly;
  throw ValidationError("unknown mining strategy '" + name + "'");
}

const Sample& find_image(const Dataset& ds, const std::string& id) {
  if (ds.empty()) throw ValidationError("dataset is empty");
  if (id.empty()) return ds.images.front();
  for (const auto& s : ds.images) {
    if (s.proposals.image_id == id) return s;
  }
  throw ValidationError("no image '" + id + "' in dataset");
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string out = "dataset.jsonl";
  std::optional<int> images;
  std::string oracle_scores;
};

void run_generate(Context& ctx, const GenerateArgs& a) {
  if (ctx.global.seed) ctx.synth.seed = *ctx.global.seed;
  if (a.images) ctx.synth.num_images = *a.images;
  Dataset ds = generate(ctx.synth);
  const fs::path path = ctx.output(a.out);
  save_dataset(path, ds);
  std::vector<std::string> outputs{path.string()};
  if (!a.oracle_scores.empty()) {
    apply_oracle_scores(ds);
    const fs::path scores = ctx.output(a.oracle_scores);
    save_scores(scores, ds);
    outputs.push_back(scores.string());
  }
  ctx.write_manifest("generate", {}, outputs);
  ctx.out << "wrote " << ds.size() << " images to " << path.string() << '\n';
}

// ---- mine -------------------------------------------------------------------

struct MineArgs {
  std::string dataset;
  std::string scores;
  bool oracle = false;
  std::string strategy = "full";
  std::optional<double> alpha;
  std::string out = "mined.jsonl";
};

void run_mine(Context& ctx, const MineArgs& a) {
  Dataset ds = read_dataset(ctx, a.dataset);
  std::vector<std::string> inputs{a.dataset};
  if (a.oracle) {
    apply_oracle_scores(ds);
  } else if (!a.scores.empty()) {
    attach_scores(ds, load_scores(a.scores));
    inputs.push_back(a.scores);
  } else {
    throw ValidationError("mine: pass --scores FILE or --oracle");
  }
  MiningConfig mcfg;
  mcfg.iou_threshold = ctx.train.iou_threshold;
  mcfg.include_core_in_davg = ctx.train.include_core_in_davg;
  mcfg.alpha = a.alpha.value_or(ctx.train.alpha1);
  mcfg.validate();
  const MiningStrategy strategy = parse_strategy(a.strategy);

  std::vector<std::vector<AppearanceGraph>> graphs;
  graphs.reserve(ds.size());
  for (const auto& s : ds.images) graphs.push_back(mine_all(s.proposals, mcfg, strategy));
  const fs::path path = ctx.output(a.out);
  write_text_file(path, mined_to_jsonl(ds, graphs));

  MetricsReport report;
  const bool any_gt = std::any_of(ds.images.begin(), ds.images.end(), [](const Sample& s) { return s.has_gt; });
  if (any_gt) report.instance_recall = instance_recall(ds, graphs);
  const fs::path metrics = ctx.output("mine_metrics.json");
  write_text_file(metrics, metrics_to_json(report));
  ctx.write_manifest("mine", inputs, {path.string(), metrics.string()});
  if (report.instance_recall) ctx.report("instance_recall %.4f", *report.instance_recall);
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string dataset;
  std::optional<int> iterations;
  std::string mode;
  std::string checkpoint = "checkpoint.txt";
  std::string trace = "trace.jsonl";
};

void run_train(Context& ctx, const TrainArgs& a) {
  if (ctx.global.seed) ctx.train.seed = *ctx.global.seed;
  if (a.iterations) ctx.train.iterations = *a.iterations;
  if (!a.mode.empty()) ctx.train.mode = parse_ablation_mode(a.mode);
  const Dataset ds = read_dataset(ctx, a.dataset);
  const TrainResult result = train(ds, ctx.train);
  const fs::path ckpt = ctx.output(a.checkpoint);
  const fs::path trace = ctx.output(a.trace);
  save_checkpoint(ckpt, result.model);
  write_text_file(trace, trace_to_jsonl(result.trace));
  ctx.write_manifest("train", {a.dataset}, {ckpt.string(), trace.string()});
  ctx.out << "trained " << ctx.train.iterations << " iterations (" << to_string(ctx.train.mode)
          << "), checkpoint " << ckpt.string() << '\n';
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string dataset;
  std::string checkpoint;
  std::string detections;
  std::string out = "metrics.json";
};

void run_evaluate(Context& ctx, const EvaluateArgs& a) {
  const Dataset ds = read_dataset(ctx, a.dataset);
  std::vector<std::string> inputs{a.dataset};
  std::vector<std::string> outputs;
  MetricsReport report;
  if (!a.checkpoint.empty()) {
    const MidModel model = load_checkpoint(a.checkpoint);
    if (model.feature_dim != ds.feature_dim || model.num_classes != ds.num_classes) {
      throw ValidationError("checkpoint dimensions do not match the dataset");
    }
    inputs.push_back(a.checkpoint);
    const auto dets = detect(model, ds, ctx.train.eval_top_k, ctx.train.eval_nms, ctx.train.threads);
    const fs::path det_path = ctx.output("detections.jsonl");
    save_detections(det_path, dets);
    outputs.push_back(det_path.string());
    report = evaluate_model(model, ds, ctx.train);
  } else if (!a.detections.empty()) {
    inputs.push_back(a.detections);
    const auto dets = load_detections(a.detections);
    report = evaluate_detections(dets, index_ground_truth(ds), ds.num_classes);
  } else {
    throw ValidationError("evaluate: pass --checkpoint FILE or --detections FILE");
  }
  const fs::path path = ctx.output(a.out);
  write_text_file(path, metrics_to_json(report));
  outputs.insert(outputs.begin(), path.string());
  ctx.write_manifest("evaluate", inputs, outputs);
  if (report.mean_ap) ctx.report("mAP %.4f", *report.mean_ap);
  if (report.corloc) ctx.report("CorLoc %.4f", *report.corloc);
  if (report.instance_recall) ctx.report("instance_recall %.4f", *report.instance_recall);
}

// ---- ablate -----------------------------------------------------------------

struct AblateArgs {
  std::string dataset;
  std::string eval_dataset;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<std::string> modes;
  std::optional<int> iterations;
};

void run_ablate(Context& ctx, const AblateArgs& a) {
  if (ctx.global.seed) ctx.synth.seed = *ctx.global.seed;
  if (a.iterations) ctx.train.iterations = *a.iterations;
  std::vector<AblationMode> modes;
  if (a.modes.empty()) {
    modes.assign(std::begin(kAllModes), std::end(kAllModes));
  } else {
    for (const auto& m : a.modes) modes.push_back(parse_ablation_mode(m));
  }
  std::vector<std::string> inputs;
  Dataset train_set, eval_set;
  if (a.dataset.empty()) {
    train_set = generate(ctx.synth);
  } else {
    train_set = read_dataset(ctx, a.dataset);
    inputs.push_back(a.dataset);
  }
  if (!a.eval_dataset.empty()) {
    eval_set = read_dataset(ctx, a.eval_dataset);
    inputs.push_back(a.eval_dataset);
  } else if (a.dataset.empty()) {
    SynthConfig held_out = ctx.synth;
    held_out.seed = ctx.synth.seed + 1000;
    eval_set = generate(held_out);
  } else {
    eval_set = train_set;
  }
  const AblationReport report = ablation_suite(train_set, eval_set, ctx.train, modes, a.seeds);
  const fs::path json = ctx.output("ablation.json");
  const fs::path table = ctx.output("ablation.md");
  write_text_file(json, ablation_to_json(report));
  write_text_file(table, render_ablation_table(report));
  ctx.write_manifest("ablate", inputs, {json.string(), table.string()});
  ctx.out << render_ablation_table(report);
}

// ---- render -----------------------------------------------------------------

struct RenderArgs {
  std::string dataset;
  std::string image;
  std::optional<int> class_id;
  std::string checkpoint;
  std::string scores;
  bool oracle = false;
  int resolution = 256;
};

void run_render(Context& ctx, const RenderArgs& a) {
  Dataset ds = read_dataset(ctx, a.dataset);
  std::vector<std::string> inputs{a.dataset};
  std::optional<MidModel> model;
  if (!a.checkpoint.empty()) {
    model = load_checkpoint(a.checkpoint);
    inputs.push_back(a.checkpoint);
    for (auto& s : ds.images) s.proposals.scores = detection_scores(*model, s.proposals.features);
  } else if (!a.scores.empty()) {
    attach_scores(ds, load_scores(a.scores));
    inputs.push_back(a.scores);
  } else if (a.oracle) {
    apply_oracle_scores(ds);
  } else {
    throw ValidationError("render: pass --checkpoint, --scores or --oracle");
  }
  const Sample& s = find_image(ds, a.image);
  const ProposalSet& ps = s.proposals;
  int c = 0;
  if (a.class_id) {
    c = *a.class_id;
    if (c < 1 || c > ds.num_classes) throw ValidationError("render: --class out of range");
  } else {
    const auto active = ps.active_classes();
    if (active.empty()) throw ValidationError("render: image has no labels; pass --class");
    c = active.front();
  }

  const std::string stem = ps.image_id + "_c" + std::to_string(c);
  const fs::path pgm = ctx.output("objectness_" + stem + ".pgm");
  write_text_file(pgm, encode_pgm(render_objectness_map(ps, ps.scores, c, a.resolution)));

  std::vector<Detection> dets;
  for (const auto& d : detections_from_scores(ps, ps.scores, ctx.train.eval_top_k, ctx.train.eval_nms)) {
    if (d.class_id == c) dets.push_back(d);
  }
  const fs::path svg = ctx.output("detections_" + stem + ".svg");
  write_text_file(svg, render_detections_svg(ps, dets, s.has_gt ? &s.gt : nullptr));

  std::vector<AppearanceGraph> graphs;
  if (ps.has_label(c)) {
    MiningConfig mcfg = ctx.train.mining_at(0);
    graphs.push_back(mine_instances(ps, c, mcfg));
  }
  const fs::path graph = ctx.output("graph_" + stem + ".svg");
  write_text_file(graph, render_graph_svg(ps, graphs));
  ctx.write_manifest("render", inputs, {pgm.string(), svg.string(), graph.string()});
  ctx.out << "rendered " << pgm.string() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised detection with online instance mining", "oim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed (generator seed for generate/ablate, training seed for train)");
  app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and the run manifest")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-image work")->check(CLI::PositiveNumber)->capture_default_str();

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "Write a synthetic dataset as JSON Lines");
  cmd_gen->add_option("--out", gen.out, "Dataset file")->capture_default_str();
  cmd_gen->add_option("--images", gen.images, "Number of images");
  cmd_gen->add_option("--oracle-scores", gen.oracle_scores, "Also write ground-truth derived scores");

  MineArgs mine;
  auto* cmd_mine = app.add_subcommand("mine", "Mine instances from proposal scores");
  cmd_mine->add_option("--dataset", mine.dataset, "Dataset file")->required();
  auto* mine_scores = cmd_mine->add_option("--scores", mine.scores, "Scores file");
  cmd_mine->add_flag("--oracle", mine.oracle, "Use scores derived from ground truth")->excludes(mine_scores);
  cmd_mine->add_option("--strategy", mine.strategy, "full, core_spatial or appearance_only")->capture_default_str();
  cmd_mine->add_option("--alpha", mine.alpha, "Appearance gate (default: alpha1)");
  cmd_mine->add_option("--out", mine.out, "Mined graphs file")->capture_default_str();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Train a model and write a checkpoint and trace");
  cmd_train->add_option("--dataset", tr.dataset, "Dataset file")->required();
  cmd_train->add_option("--iterations", tr.iterations, "Override the iteration count");
  cmd_train->add_option("--mode", tr.mode, "Ablation mode");
  cmd_train->add_option("--checkpoint", tr.checkpoint, "Checkpoint file")->capture_default_str();
  cmd_train->add_option("--trace", tr.trace, "Trace file")->capture_default_str();

  EvaluateArgs ev;
  auto* cmd_eval = app.add_subcommand("evaluate", "Compute mAP, CorLoc and instance recall");
  cmd_eval->add_option("--dataset", ev.dataset, "Dataset with ground truth")->required();
  auto* ev_ckpt = cmd_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  cmd_eval->add_option("--detections", ev.detections, "Detections file")->excludes(ev_ckpt);
  cmd_eval->add_option("--out", ev.out, "Metrics file")->capture_default_str();

  AblateArgs ab;
  auto* cmd_ablate = app.add_subcommand("ablate", "Train and compare all ablation modes");
  cmd_ablate->add_option("--dataset", ab.dataset, "Training dataset (default: synthetic)");
  cmd_ablate->add_option("--eval-dataset", ab.eval_dataset, "Evaluation dataset");
  cmd_ablate->add_option("--seeds", ab.seeds, "Training seeds")->delimiter(',');
  cmd_ablate->add_option("--modes", ab.modes, "Modes to run (default: all)")->delimiter(',');
  cmd_ablate->add_option("--iterations", ab.iterations, "Override the iteration count");

  RenderArgs rd;
  auto* cmd_render = app.add_subcommand("render", "Render an objectness map and graph snapshot");
  cmd_render->add_option("--dataset", rd.dataset, "Dataset file")->required();
  cmd_render->add_option("--image", rd.image, "Image id (default: first image)");
  cmd_render->add_option("--class", rd.class_id, "Class id (default: first label)");
  auto* rd_ckpt = cmd_render->add_option("--checkpoint", rd.checkpoint, "Checkpoint file");
  auto* rd_scores = cmd_render->add_option("--scores", rd.scores, "Scores file")->excludes(rd_ckpt);
  cmd_render->add_flag("--oracle", rd.oracle, "Use scores derived from ground truth")->excludes(rd_ckpt)->excludes(rd_scores);
  cmd_render->add_option("--resolution", rd.resolution, "Pixels along the longer side")->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << library_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    Context ctx{g, out, err, TrainConfig{}, SynthConfig{}};
    if (!g.config.empty()) apply_config(load_config(g.config), ctx.train, ctx.synth);
    ctx.train.threads = g.threads;
    ctx.train.validate();
    ctx.synth.validate();
    if (cmd_gen->parsed()) run_generate(ctx, gen);
    else if (cmd_mine->parsed()) run_mine(ctx, mine);
    else if (cmd_train->parsed()) run_train(ctx, tr);
    else if (cmd_eval->parsed()) run_evaluate(ctx, ev);
    else if (cmd_ablate->parsed()) run_ablate(ctx, ab);
    else if (cmd_render->parsed()) run_render(ctx, rd);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace oim
