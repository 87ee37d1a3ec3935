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


#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "oim/config.hpp"
#include "oim/eval.hpp"
#include "oim/geometry.hpp"
#include "oim/io.hpp"
#include "oim/mining.hpp"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"

namespace py = pybind11;
using namespace oim;

namespace {

BoxF to_box(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
std::array<double, 4> from_box(const BoxF& b) { return {b.x1, b.y1, b.x2, b.y2}; }

Matrix boxes_matrix(const std::vector<BoxF>& boxes) {
  Matrix m(static_cast<Eigen::Index>(boxes.size()), 4);
  for (std::size_t i = 0; i < boxes.size(); ++i) m.row(i) << boxes[i].x1, boxes[i].y1, boxes[i].x2, boxes[i].y2;
  return m;
}

std::vector<BoxF> boxes_from_matrix(const Matrix& m) {
  if (m.rows() > 0 && m.cols() != 4) throw ValidationError("boxes must be an N x 4 array");
  std::vector<BoxF> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back({m(i, 0), m(i, 1), m(i, 2), m(i, 3)});
  return out;
}

py::dict graph_dict(const AppearanceGraph& g) {
  py::list spatial;
  for (const auto& sg : g.spatial) spatial.append(py::dict(py::arg("core") = sg.core, py::arg("nodes") = sg.nodes));
  return py::dict(py::arg("class_id") = g.class_id, py::arg("core") = g.core, py::arg("nodes") = g.nodes,
                  py::arg("d_avg") = g.d_avg, py::arg("spatial") = spatial);
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict per_class;
  for (const auto& [c, m] : r.per_class) {
    per_class[py::int_(c)] = py::dict(py::arg("num_gt") = m.num_gt, py::arg("positive_images") = m.positive_images,
                                      py::arg("ap") = m.ap, py::arg("corloc") = m.corloc);
  }
  return py::dict(py::arg("per_class") = per_class, py::arg("mAP") = r.mean_ap, py::arg("CorLoc") = r.corloc,
                  py::arg("instance_recall") = r.instance_recall);
}

MiningConfig mining_config(double alpha, double iou_threshold, bool include_core) {
  MiningConfig cfg{iou_threshold, alpha, include_core};
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_oim, m) {
  m.doc() = "Online instance mining for weakly supervised detection";
  m.attr("__version__") = library_version();

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);

  m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) { return iou(to_box(a), to_box(b)); },
        py::arg("a"), py::arg("b"));
  m.def(
      "nms",
      [](const Matrix& boxes, const std::vector<double>& scores, double threshold) {
        const auto b = boxes_from_matrix(boxes);
        return nms(b, scores, threshold);
      },
      py::arg("boxes"), py::arg("scores"), py::arg("threshold") = 0.3);

  py::class_<ProposalSet>(m, "ProposalSet")
      .def(py::init<>())
      .def_readwrite("image_id", &ProposalSet::image_id)
      .def_readwrite("width", &ProposalSet::width)
      .def_readwrite("height", &ProposalSet::height)
      .def_property(
          "boxes", [](const ProposalSet& ps) { return boxes_matrix(ps.boxes); },
          [](ProposalSet& ps, const Matrix& b) { ps.boxes = boxes_from_matrix(b); })
      .def_readwrite("features", &ProposalSet::features)
      .def_readwrite("scores", &ProposalSet::scores)
      .def_readwrite("image_labels", &ProposalSet::image_labels)
      .def("active_classes", &ProposalSet::active_classes)
      .def("validate", [](const ProposalSet& ps) { require_valid(ps, false); })
      .def("__len__", &ProposalSet::size);

  py::class_<Sample>(m, "Sample")
      .def_readwrite("proposals", &Sample::proposals)
      .def_readonly("has_gt", &Sample::has_gt)
      .def_property_readonly("gt", [](const Sample& s) {
        py::list out;
        for (const auto& g : s.gt) out.append(py::make_tuple(from_box(g.box), g.class_id));
        return out;
      });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("feature_dim", &Dataset::feature_dim)
      .def_readwrite("images", &Dataset::images)
      .def("__len__", &Dataset::size);

  py::class_<MidModel>(m, "Model")
      .def_readonly("feature_dim", &MidModel::feature_dim)
      .def_readonly("num_classes", &MidModel::num_classes)
      .def_readonly("num_heads", &MidModel::num_heads)
      .def("detection_scores", [](const MidModel& model, const Matrix& f) { return detection_scores(model, f); })
      .def("__eq__", &MidModel::operator==);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("lr1", &TrainConfig::lr1)
      .def_readwrite("lr2", &TrainConfig::lr2)
      .def_readwrite("alpha1", &TrainConfig::alpha1)
      .def_readwrite("alpha2", &TrainConfig::alpha2)
      .def_readwrite("iou_threshold", &TrainConfig::iou_threshold)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("num_heads", &TrainConfig::num_heads)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_property(
          "mode", [](const TrainConfig& c) { return std::string(to_string(c.mode)); },
          [](TrainConfig& c, const std::string& s) { c.mode = parse_ablation_mode(s); });

  m.def(
      "generate",
      [](py::kwargs kwargs) {
        SynthConfig sc;
        TrainConfig unused;
        ConfigMap cfg;
        for (auto item : kwargs) {
          cfg["synth." + py::str(item.first).cast<std::string>()] = py::str(item.second).cast<std::string>();
        }
        apply_config(cfg, unused, sc);
        return generate(sc);
      },
      "Synthetic dataset; keyword arguments override generator settings (seed=7, num_images=...).");
  m.def("apply_oracle_scores", &apply_oracle_scores, py::arg("dataset"));

  m.def(
      "mine",
      [](const ProposalSet& ps, int class_id, double alpha, double iou_threshold, bool include_core) {
        return graph_dict(mine_instances(ps, class_id, mining_config(alpha, iou_threshold, include_core)));
      },
      py::arg("proposals"), py::arg("class_id"), py::arg("alpha") = 5.0, py::arg("iou_threshold") = 0.5,
      py::arg("include_core_in_davg") = true);
  m.def(
      "mining_recall",
      [](const Dataset& ds, const std::string& strategy, double alpha) {
        const MiningStrategy st = strategy == "full"           ? MiningStrategy::kFull
                                  : strategy == "core_spatial" ? MiningStrategy::kCoreSpatial
                                  : strategy == "appearance_only"
                                      ? MiningStrategy::kAppearanceOnly
                                      : throw ValidationError("unknown strategy '" + strategy + "'");
        MiningConfig cfg = mining_config(alpha, 0.5, true);
        std::vector<std::vector<AppearanceGraph>> graphs;
        for (const auto& s : ds.images) graphs.push_back(mine_all(s.proposals, cfg, st));
        return instance_recall(ds, graphs);
      },
      py::arg("dataset"), py::arg("strategy") = "full", py::arg("alpha") = 5.0);

  m.def(
      "train",
      [](const Dataset& ds, const TrainConfig& cfg) {
        py::gil_scoped_release release;
        return train(ds, cfg).model;
      },
      py::arg("dataset"), py::arg("config") = TrainConfig{});
  m.def(
      "evaluate",
      [](const MidModel& model, const Dataset& ds, const TrainConfig& cfg) {
        return metrics_dict(evaluate_model(model, ds, cfg));
      },
      py::arg("model"), py::arg("dataset"), py::arg("config") = TrainConfig{});

  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); }, py::arg("path"));
  m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("dataset"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
}
