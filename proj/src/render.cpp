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


#include "oim/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "oim/io.hpp"

namespace oim {

namespace {

// Distinct stroke colors per class; cycles past eight classes.
const char* class_color(int class_id) {
  static const char* kColors[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                                  "#911eb4", "#42d4f4", "#f032e6", "#9a6324"};
  return kColors[(std::max(class_id, 1) - 1) % 8];
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string svg_open(const ProposalSet& ps) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(ps.width) + "\" height=\"" +
         num(ps.height) + "\" viewBox=\"0 0 " + num(ps.width) + " " + num(ps.height) + "\">\n" +
         "<rect x=\"0\" y=\"0\" width=\"" + num(ps.width) + "\" height=\"" + num(ps.height) +
         "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
}

std::string svg_rect(const BoxF& b, const char* color, double stroke, const char* dash = nullptr) {
  std::string s = "<rect x=\"" + num(b.x1) + "\" y=\"" + num(b.y1) + "\" width=\"" +
                  num(b.width()) + "\" height=\"" + num(b.height()) +
                  "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(stroke) + "\"";
  if (dash) s += std::string(" stroke-dasharray=\"") + dash + "\"";
  return s + "/>\n";
}

}  // namespace

GrayImage render_objectness_map(const ProposalSet& ps, const Matrix& scores, int class_id,
                                int resolution) {
  if (resolution < 1) throw ValidationError("render: resolution must be positive");
  if (!(ps.width > 0.0 && ps.height > 0.0)) throw ValidationError("render: image has no extent");
  if (scores.rows() != static_cast<Eigen::Index>(ps.size()) || class_id < 0 ||
      class_id >= scores.cols()) {
    throw ValidationError("render: scores do not match the proposals or class");
  }
  const double scale = resolution / std::max(ps.width, ps.height);
  GrayImage img;
  img.width = std::max(1, static_cast<int>(std::lround(ps.width * scale)));
  img.height = std::max(1, static_cast<int>(std::lround(ps.height * scale)));
  std::vector<double> best(static_cast<std::size_t>(img.width) * img.height, 0.0);
  const double sx = ps.width / img.width;
  const double sy = ps.height / img.height;
  for (std::size_t j = 0; j < ps.size(); ++j) {
    const double s = std::clamp(scores(j, class_id), 0.0, 1.0);
    if (!(s > 0.0)) continue;
    const BoxF& b = ps.boxes[j];
    // Pixels whose centers (x + 0.5) * sx fall in [x1, x2).
    const int x0 = std::max(0, static_cast<int>(std::ceil(b.x1 / sx - 0.5)));
    const int x1 = std::min(img.width, static_cast<int>(std::ceil(b.x2 / sx - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(b.y1 / sy - 0.5)));
    const int y1 = std::min(img.height, static_cast<int>(std::ceil(b.y2 / sy - 0.5)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        double& p = best[static_cast<std::size_t>(y) * img.width + x];
        p = std::max(p, s);
      }
    }
  }
  img.pixels.resize(best.size());
  for (std::size_t i = 0; i < best.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(best[i] * 255.0));
  }
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

std::string render_detections_svg(const ProposalSet& ps, const std::vector<Detection>& detections,
                                  const GroundTruth* gt) {
  std::string s = svg_open(ps);
  if (gt) {
    for (const auto& g : *gt) s += svg_rect(g.box, "#000000", 1.0, "4 3");
  }
  for (const auto& d : detections) {
    if (d.image_id != ps.image_id) continue;
    s += svg_rect(d.box, class_color(d.class_id), 2.0);
    s += "<text x=\"" + num(d.box.x1 + 2) + "\" y=\"" + num(d.box.y1 + 12) +
         "\" font-size=\"11\" fill=\"" + class_color(d.class_id) + "\">" +
         std::to_string(d.class_id) + ":" + num(d.score) + "</text>\n";
  }
  return s + "</svg>\n";
}

std::string render_graph_svg(const ProposalSet& ps, const std::vector<AppearanceGraph>& graphs) {
  std::string s = svg_open(ps);
  auto center = [&](int j) {
    const BoxF& b = ps.boxes[j];
    return std::pair{0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)};
  };
  for (const auto& g : graphs) {
    const char* color = class_color(g.class_id);
    for (const auto& sg : g.spatial) {
      for (int j : sg.nodes) {
        if (j != sg.core) s += svg_rect(ps.boxes[j], color, 0.75, "2 2");
      }
      s += svg_rect(ps.boxes[sg.core], color, sg.core == g.core ? 3.0 : 2.0);
    }
    const auto [cx, cy] = center(g.core);
    for (int j : g.nodes) {
      if (j == g.core) continue;
      const auto [x, y] = center(j);
      s += "<line x1=\"" + num(cx) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(x) + "\" y2=\"" +
           num(y) + "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
  }
  return s + "</svg>\n";
}

std::string render_ablation_table(const AblationReport& report) {
  char buf[160];
  std::string s = "| mode | mAP | CorLoc | instance recall | runs |\n|---|---|---|---|---|\n";
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f | %.4f | %zu |\n", to_string(row.mode),
                  row.median_map, row.median_corloc, row.median_recall, row.runs.size());
    s += buf;
  }
  s += "\nPer-seed mAP / CorLoc / instance recall:\n\n";
  for (const auto& row : report.rows) {
    s += std::string("- ") + to_string(row.mode) + ":";
    for (const auto& r : row.runs) {
      std::snprintf(buf, sizeof(buf), " [seed %llu: %.4f / %.4f / %.4f]",
                    static_cast<unsigned long long>(r.seed), r.mean_ap, r.corloc, r.instance_recall);
      s += buf;
    }
    s += "\n";
  }
  return s;
}

}  // namespace oim
