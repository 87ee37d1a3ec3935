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

#include "oim/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"

#ifndef OIM_VERSION
#define OIM_VERSION "0.0.0"
#endif

namespace oim {

using Json = nlohmann::ordered_json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return in;
}

// Errors raised while decoding one line; the caller prefixes the line number.
class FieldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const Json& field(const Json& obj, const std::string& name) {
  if (!obj.is_object()) throw FieldError("record is not a JSON object");
  auto it = obj.find(name);
  if (it == obj.end()) throw FieldError("missing field '" + name + "'");
  return *it;
}

double as_number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw FieldError("field '" + where + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw FieldError("field '" + where + "' is not finite");
  return x;
}

int as_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) throw FieldError("field '" + where + "' must be an integer");
  return v.get<int>();
}

std::string as_string(const Json& v, const std::string& where) {
  if (!v.is_string()) throw FieldError("field '" + where + "' must be a string");
  return v.get<std::string>();
}

const Json& as_array(const Json& v, const std::string& where) {
  if (!v.is_array()) throw FieldError("field '" + where + "' must be an array");
  return v;
}

BoxF as_box(const Json& v, const std::string& where) {
  const Json& a = as_array(v, where);
  if (a.size() != 4) throw FieldError("field '" + where + "' must hold 4 numbers");
  BoxF b{as_number(a[0], where), as_number(a[1], where), as_number(a[2], where),
         as_number(a[3], where)};
  if (!b.valid()) throw FieldError("field '" + where + "' is a degenerate box");
  return b;
}

Json box_json(const BoxF& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

Json number_or_null(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// Reads non-blank lines, handing each parsed record and its line number to fn.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    try {
      fn(rec, line_no);
    } catch (const FieldError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

struct ParsedImage {
  Sample sample;
  std::vector<int> labels;
  int line = 0;
};

}  // namespace

Dataset parse_dataset(std::istream& in, std::vector<std::string>* warnings) {
  std::vector<ParsedImage> parsed;
  std::optional<int> declared_classes;
  int feature_dim = -1;
  int max_class = 0;

  for_each_record(in, [&](const Json& rec, int line_no) {
    ParsedImage img;
    img.line = line_no;
    ProposalSet& ps = img.sample.proposals;
    ps.image_id = as_string(field(rec, "image_id"), "image_id");
    ps.width = as_number(field(rec, "width"), "width");
    ps.height = as_number(field(rec, "height"), "height");
    if (!(ps.width > 0.0 && ps.height > 0.0)) throw FieldError("width and height must be positive");

    if (auto it = rec.find("num_classes"); it != rec.end()) {
      const int c = as_int(*it, "num_classes");
      if (c < 1) throw FieldError("field 'num_classes' must be positive");
      if (declared_classes && *declared_classes != c) {
        throw FieldError("field 'num_classes' is " + std::to_string(c) + ", earlier records say " +
                         std::to_string(*declared_classes));
      }
      declared_classes = c;
    }

    const Json& labels = as_array(field(rec, "labels"), "labels");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int c = as_int(labels[i], "labels[" + std::to_string(i) + "]");
      if (c < 1) throw FieldError("field 'labels[" + std::to_string(i) + "]' must be >= 1");
      img.labels.push_back(c);
      max_class = std::max(max_class, c);
    }

    const Json& props = as_array(field(rec, "proposals"), "proposals");
    const int n = static_cast<int>(props.size());
    if (n == 0) throw FieldError("field 'proposals' is empty");
    for (int j = 0; j < n; ++j) {
      const std::string where = "proposals[" + std::to_string(j) + "]";
      ps.boxes.push_back(as_box(field(props[j], "box"), where + ".box"));
      const Json& feat = as_array(field(props[j], "feature"), where + ".feature");
      const int d = static_cast<int>(feat.size());
      if (feature_dim < 0) feature_dim = d;
      if (d != feature_dim || d == 0) {
        throw FieldError("field '" + where + ".feature' has " + std::to_string(d) +
                         " values, expected " + std::to_string(feature_dim));
      }
      if (j == 0) ps.features.resize(n, d);
      for (int k = 0; k < d; ++k) ps.features(j, k) = as_number(feat[k], where + ".feature");
    }

    if (auto it = rec.find("gt"); it != rec.end()) {
      const Json& gt = as_array(*it, "gt");
      img.sample.has_gt = true;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        const std::string where = "gt[" + std::to_string(i) + "]";
        GtInstance g;
        g.box = as_box(field(gt[i], "box"), where + ".box");
        g.class_id = as_int(field(gt[i], "class"), where + ".class");
        if (g.class_id < 1) throw FieldError("field '" + where + ".class' must be >= 1");
        max_class = std::max(max_class, g.class_id);
        img.sample.gt.push_back(g);
      }
    }
    parsed.push_back(std::move(img));
  });

  Dataset ds;
  if (parsed.empty()) {
    if (warnings) warnings->push_back("dataset is empty");
    return ds;
  }
  ds.num_classes = declared_classes.value_or(max_class);
  ds.feature_dim = feature_dim;
  if (ds.num_classes < 1) {
    throw ValidationError("line " + std::to_string(parsed.front().line) +
                          ": no class ids found and no 'num_classes' given");
  }
  for (auto& img : parsed) {
    const auto fail = [&](const std::string& msg) {
      throw ValidationError("line " + std::to_string(img.line) + ": " + msg);
    };
    ProposalSet& ps = img.sample.proposals;
    ps.image_labels.assign(ds.num_classes, 0);
    for (int c : img.labels) {
      if (c > ds.num_classes) fail("field 'labels' has class " + std::to_string(c) + " > C");
      ps.image_labels[c - 1] = 1;
    }
    for (const auto& g : img.sample.gt) {
      if (g.class_id > ds.num_classes) fail("field 'gt' has class " + std::to_string(g.class_id) + " > C");
    }
    const auto violations = validate_proposal_set(ps, /*require_labels=*/false);
    if (!violations.empty()) fail(violations.front().message);
    ds.images.push_back(std::move(img.sample));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  auto in = open_input(path);
  try {
    return parse_dataset(in, warnings);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& s : dataset.images) {
    const ProposalSet& ps = s.proposals;
    Json rec;
    rec["image_id"] = ps.image_id;
    rec["width"] = ps.width;
    rec["height"] = ps.height;
    rec["num_classes"] = dataset.num_classes;
    Json labels = Json::array();
    for (int c : ps.active_classes()) labels.push_back(c);
    rec["labels"] = labels;
    Json props = Json::array();
    for (std::size_t j = 0; j < ps.size(); ++j) {
      Json feat = Json::array();
      for (int k = 0; k < ps.features.cols(); ++k) feat.push_back(ps.features(j, k));
      props.push_back(Json{{"box", box_json(ps.boxes[j])}, {"feature", feat}});
    }
    rec["proposals"] = props;
    if (s.has_gt) {
      Json gt = Json::array();
      for (const auto& g : s.gt) gt.push_back(Json{{"box", box_json(g.box)}, {"class", g.class_id}});
      rec["gt"] = gt;
    }
    out << rec.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::ostringstream ss;
  write_dataset(ss, dataset);
  write_text_file(path, ss.str());
}

ScoreTable parse_scores(std::istream& in) {
  ScoreTable table;
  for_each_record(in, [&](const Json& rec, int) {
    const std::string id = as_string(field(rec, "image_id"), "image_id");
    const Json& rows = as_array(field(rec, "scores"), "scores");
    Matrix m;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const std::string where = "scores[" + std::to_string(j) + "]";
      const Json& row = as_array(rows[j], where);
      if (j == 0) m.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(row.size()));
      if (static_cast<Eigen::Index>(row.size()) != m.cols()) {
        throw FieldError("field '" + where + "' has " + std::to_string(row.size()) +
                         " values, expected " + std::to_string(m.cols()));
      }
      for (std::size_t k = 0; k < row.size(); ++k) m(j, k) = as_number(row[k], where);
    }
    if (!table.emplace(id, std::move(m)).second) throw FieldError("duplicate image_id '" + id + "'");
  });
  return table;
}

ScoreTable load_scores(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_scores(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_scores(const std::filesystem::path& path, const Dataset& dataset) {
  std::string text;
  for (const auto& s : dataset.images) {
    Json rows = Json::array();
    for (Eigen::Index j = 0; j < s.proposals.scores.rows(); ++j) {
      Json row = Json::array();
      for (Eigen::Index k = 0; k < s.proposals.scores.cols(); ++k) row.push_back(s.proposals.scores(j, k));
      rows.push_back(row);
    }
    text += Json{{"image_id", s.proposals.image_id}, {"scores", rows}}.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

void attach_scores(Dataset& dataset, const ScoreTable& scores) {
  for (auto& s : dataset.images) {
    ProposalSet& ps = s.proposals;
    auto it = scores.find(ps.image_id);
    if (it == scores.end()) throw ValidationError("no scores for image '" + ps.image_id + "'");
    const Matrix& m = it->second;
    if (m.rows() != static_cast<Eigen::Index>(ps.size()) || m.cols() != dataset.num_classes + 1) {
      throw ValidationError("scores for image '" + ps.image_id + "' are " +
                            std::to_string(m.rows()) + " x " + std::to_string(m.cols()) +
                            ", expected " + std::to_string(ps.size()) + " x " +
                            std::to_string(dataset.num_classes + 1));
    }
    ps.scores = m;
    require_valid(ps, /*require_labels=*/false);
  }
}

std::vector<Detection> parse_detections(std::istream& in) {
  std::vector<Detection> dets;
  for_each_record(in, [&](const Json& rec, int) {
    Detection d;
    d.image_id = as_string(field(rec, "image_id"), "image_id");
    d.class_id = as_int(field(rec, "class"), "class");
    if (d.class_id < 1) throw FieldError("field 'class' must be >= 1");
    d.box = as_box(field(rec, "box"), "box");
    d.score = as_number(field(rec, "score"), "score");
    dets.push_back(std::move(d));
  });
  return dets;
}

std::vector<Detection> load_detections(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_detections(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_detections(const std::filesystem::path& path, const std::vector<Detection>& dets) {
  std::string text;
  for (const auto& d : dets) {
    text += Json{{"image_id", d.image_id}, {"class", d.class_id}, {"box", box_json(d.box)},
                 {"score", d.score}}
                .dump();
    text += '\n';
  }
  write_text_file(path, text);
}

std::string metrics_to_json(const MetricsReport& report) {
  Json per_class = Json::object();
  for (const auto& [c, m] : report.per_class) {
    per_class[std::to_string(c)] = Json{{"num_gt", m.num_gt},
                                        {"positive_images", m.positive_images},
                                        {"AP", number_or_null(m.ap)},
                                        {"CorLoc", number_or_null(m.corloc)}};
  }
  Json doc{{"per_class", per_class},
           {"mAP", number_or_null(report.mean_ap)},
           {"CorLoc", number_or_null(report.corloc)},
           {"instance_recall", number_or_null(report.instance_recall)}};
  return doc.dump(2) + "\n";
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& trace) {
  std::string text;
  for (const auto& r : trace) {
    Json rec{{"iteration", r.iteration},
             {"lr", r.lr},
             {"alpha", r.alpha},
             {"images", r.images},
             {"mined_instances", r.mined_instances},
             {"instance_recall", number_or_null(r.instance_recall)},
             {"loss_ce", r.loss_ce},
             {"loss_oir", r.loss_oir}};
    text += rec.dump();
    text += '\n';
  }
  return text;
}

std::string mined_to_jsonl(const Dataset& dataset,
                           const std::vector<std::vector<AppearanceGraph>>& graphs) {
  std::string text;
  for (std::size_t i = 0; i < dataset.size() && i < graphs.size(); ++i) {
    Json gs = Json::array();
    for (const auto& g : graphs[i]) {
      Json spatial = Json::array();
      for (const auto& sg : g.spatial) spatial.push_back(Json{{"core", sg.core}, {"nodes", sg.nodes}});
      gs.push_back(Json{{"class", g.class_id},
                        {"core", g.core},
                        {"nodes", g.nodes},
                        {"d_avg", g.d_avg},
                        {"spatial", spatial}});
    }
    text += Json{{"image_id", dataset.images[i].proposals.image_id}, {"graphs", gs}}.dump();
    text += '\n';
  }
  return text;
}

std::string ablation_to_json(const AblationReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json runs = Json::array();
    for (const auto& r : row.runs) {
      runs.push_back(Json{{"seed", r.seed},
                          {"mAP", r.mean_ap},
                          {"CorLoc", r.corloc},
                          {"instance_recall", r.instance_recall}});
    }
    rows.push_back(Json{{"mode", to_string(row.mode)},
                        {"median_mAP", row.median_map},
                        {"median_CorLoc", row.median_corloc},
                        {"median_instance_recall", row.median_recall},
                        {"runs", runs}});
  }
  return Json{{"rows", rows}}.dump(2) + "\n";
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

constexpr const char* kCheckpointMagic = "oim-checkpoint v1";

void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

void write_tensor(std::ostream& out, const std::string& name, const Vector& v) {
  write_tensor(out, name, Matrix(v.transpose()));
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_;
    return s;
  }

  Matrix tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    std::istringstream header(line());
    std::string got;
    Eigen::Index r = -1, c = -1;
    header >> got >> r >> c;
    if (got != name) fail("expected tensor '" + name + "', found '" + got + "'");
    if (r != rows || c != cols) {
      fail("tensor '" + name + "' is " + std::to_string(r) + " x " + std::to_string(c) +
           ", expected " + std::to_string(rows) + " x " + std::to_string(cols));
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const std::string s = line();
      const char* p = s.data();
      const char* end = s.data() + s.size();
      for (Eigen::Index j = 0; j < cols; ++j) {
        while (p < end && *p == ' ') ++p;
        double x = 0.0;
        const auto res = std::from_chars(p, end, x);
        if (res.ec != std::errc()) fail("bad number in tensor '" + name + "'");
        m(i, j) = x;
        p = res.ptr;
      }
      while (p < end && *p == ' ') ++p;
      if (p != end) fail("trailing values in tensor '" + name + "'");
    }
    return m;
  }

  Vector vec(const std::string& name, Eigen::Index n) { return tensor(name, 1, n).row(0).transpose(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("checkpoint line " + std::to_string(line_) + ": " + msg);
  }

 private:
  std::istream& in_;
  int line_ = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const MidModel& model) {
  model.validate();
  out << kCheckpointMagic << '\n';
  out << model.feature_dim << ' ' << model.num_classes << ' ' << model.num_heads << '\n';
  write_tensor(out, "cls_weight", model.cls_weight);
  write_tensor(out, "cls_bias", model.cls_bias);
  write_tensor(out, "det_weight", model.det_weight);
  write_tensor(out, "det_bias", model.det_bias);
  for (int k = 0; k < model.num_heads; ++k) {
    write_tensor(out, "ref_weight_" + std::to_string(k + 1), model.ref_weight[k]);
    write_tensor(out, "ref_bias_" + std::to_string(k + 1), model.ref_bias[k]);
  }
}

MidModel read_checkpoint(std::istream& in) {
  CheckpointReader r(in);
  if (r.line() != kCheckpointMagic) r.fail("not an oim checkpoint");
  MidModel m;
  std::istringstream dims(r.line());
  if (!(dims >> m.feature_dim >> m.num_classes >> m.num_heads)) r.fail("bad dimension line");
  if (m.feature_dim < 1 || m.num_classes < 1 || m.num_heads < 1 || m.num_heads > 5) {
    r.fail("dimensions out of range");
  }
  const int d = m.feature_dim, c = m.num_classes;
  m.cls_weight = r.tensor("cls_weight", d, c);
  m.cls_bias = r.vec("cls_bias", c);
  m.det_weight = r.tensor("det_weight", d, c);
  m.det_bias = r.vec("det_bias", c);
  for (int k = 0; k < m.num_heads; ++k) {
    m.ref_weight.push_back(r.tensor("ref_weight_" + std::to_string(k + 1), d, c + 1));
    m.ref_bias.push_back(r.vec("ref_bias_" + std::to_string(k + 1), c + 1));
  }
  m.validate();
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const MidModel& model) {
  std::ostringstream ss;
  write_checkpoint(ss, model);
  write_text_file(path, ss.str());
}

MidModel load_checkpoint(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return read_checkpoint(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string manifest_to_json(const Manifest& manifest) {
  Json config = Json::object();
  for (const auto& [k, v] : manifest.config) config[k] = v;
  Json doc{{"tool", "oim"},
           {"version", manifest.version},
           {"command", manifest.command},
           {"config", config},
           {"inputs", manifest.inputs},
           {"outputs", manifest.outputs}};
  return doc.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  write_text_file(path, manifest_to_json(manifest));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

const char* library_version() { return OIM_VERSION; }

}  // namespace oim
