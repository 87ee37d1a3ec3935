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

#include "oim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "oim/geometry.hpp"

namespace oim {

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("synth: " + msg); };
  if (num_images < 0) fail("num_images must be non-negative");
  if (!(width > 0.0 && height > 0.0)) fail("canvas size must be positive");
  if (num_classes < 1) fail("num_classes must be positive");
  if (max_active_classes < 1 || max_active_classes > num_classes) {
    fail("max_active_classes must lie in 1..num_classes");
  }
  double total = 0.0;
  for (double w : instance_weights) {
    if (!(w >= 0.0)) fail("instance weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail("at least one instance weight must be positive");
  if (!(min_object_size > 0.0 && max_object_size >= min_object_size)) {
    fail("object size range is empty");
  }
  if (!(object_gap >= 0.0)) fail("object_gap must be non-negative");
  if (feature_dim < 1) fail("feature_dim must be positive");
  if (!(prototype_separation > 0.0)) fail("prototype_separation must be positive");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
  if (!(part_confound_strength >= 0.0 && part_confound_strength <= 1.0)) {
    fail("part_confound_strength must lie in [0, 1]");
  }
  if (!(part_fraction > 0.0 && part_fraction < 1.0)) fail("part_fraction must lie in (0, 1)");
  if (proposals_per_object < 1) fail("proposals_per_object must be positive");
  if (background_proposals < 0) fail("background_proposals must be non-negative");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vector random_direction(Rng& rng, int dim, double norm) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n01(rng);
  return v * (norm / v.norm());
}

BoxF clip(const BoxF& b, double width, double height) {
  return {std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height),
          std::clamp(b.x2, 0.0, width), std::clamp(b.y2, 0.0, height)};
}

struct Object {
  BoxF box;
  BoxF part;
  int class_id;
};

// Box strictly inside `gt` with area target * area(gt), so IoU == target.
// When the target area can hold the part, the box is anchored around it.
BoxF inner_box(Rng& rng, const Object& obj, double target) {
  const BoxF& g = obj.box;
  const double area = target * g.area();
  const double aspect = uniform(rng, 0.8, 1.25);
  double w = std::sqrt(area * g.width() / g.height()) * aspect;
  w = std::clamp(w, area / g.height(), g.width());
  const double h = area / w;
  double lo_x = g.x1;
  double hi_x = g.x2 - w;
  double lo_y = g.y1;
  double hi_y = g.y2 - h;
  if (w >= obj.part.width() && h >= obj.part.height()) {
    lo_x = std::max(lo_x, obj.part.x2 - w);
    hi_x = std::min(hi_x, obj.part.x1);
    lo_y = std::max(lo_y, obj.part.y2 - h);
    hi_y = std::min(hi_y, obj.part.y1);
  }
  const double x = uniform(rng, lo_x, hi_x);
  const double y = uniform(rng, lo_y, hi_y);
  return {x, y, x + w, y + h};
}

// Box containing `gt` with area area(gt) / target.
BoxF outer_box(Rng& rng, const BoxF& g, double target) {
  const double area = g.area() / target;
  double w = g.width() * std::sqrt(1.0 / target) * uniform(rng, 0.9, 1.1);
  double h = area / w;
  if (h < g.height()) {
    h = g.height();
    w = area / h;
  }
  if (w < g.width()) {
    w = g.width();
    h = area / w;
  }
  const double x = g.x1 - uniform(rng, 0.0, w - g.width());
  const double y = g.y1 - uniform(rng, 0.0, h - g.height());
  return {x, y, x + w, y + h};
}

// Same-size box shifted along one axis so that IoU == target.
BoxF shifted_box(Rng& rng, const BoxF& g, double target) {
  const double frac = (1.0 - target) / (1.0 + target);
  const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
  if (uniform(rng, 0.0, 1.0) < 0.5) {
    const double dx = sign * frac * g.width();
    return {g.x1 + dx, g.y1, g.x2 + dx, g.y2};
  }
  const double dy = sign * frac * g.height();
  return {g.x1, g.y1 + dy, g.x2, g.y2 + dy};
}

BoxF jittered_proposal(Rng& rng, const Object& obj, double stratum, double width, double height) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double target = uniform(rng, stratum - 0.05, stratum + 0.05);
    const double mode = uniform(rng, 0.0, 1.0);
    BoxF b;
    if (mode < 0.4) {
      b = inner_box(rng, obj, target);
    } else if (mode < 0.7) {
      b = clip(outer_box(rng, obj.box, target), width, height);
    } else {
      b = clip(shifted_box(rng, obj.box, target), width, height);
    }
    if (b.valid() && std::abs(iou(b, obj.box) - stratum) <= 0.1) return b;
  }
  // Inner boxes are never clipped, so their IoU is exact.
  return inner_box(rng, obj, stratum);
}

BoxF random_part(Rng& rng, const BoxF& g, double fraction) {
  const double aspect = uniform(rng, 0.8, 1.25);
  const double w = std::min(g.width(), g.width() * std::sqrt(fraction) * aspect);
  const double h = std::min(g.height(), fraction * g.area() / w);
  const double x = uniform(rng, g.x1, g.x2 - w);
  const double y = uniform(rng, g.y1, g.y2 - h);
  return {x, y, x + w, y + h};
}

// Template-style response: inter^2 / (|box| |region|) peaks at 1 when the
// box matches the region exactly and decays for fragments and loose boxes.
double match_quality(const BoxF& box, const BoxF& region) {
  const double inter = intersection_area(box, region);
  if (inter <= 0.0) return 0.0;
  return inter * inter / (box.area() * region.area());
}

Vector region_feature(const BoxF& box, const std::vector<Object>& objects,
                      const SynthPrototypes& protos, double confound) {
  Vector f = Vector::Zero(protos.background.size());
  double covered = 0.0;
  for (const auto& o : objects) {
    const double in_obj = intersection_area(box, o.box);
    if (in_obj <= 0.0) continue;
    f += match_quality(box, o.box) * protos.body.row(o.class_id - 1).transpose();
    f += confound * match_quality(box, o.part) *
         protos.part_offset.row(o.class_id - 1).transpose();
    covered += in_obj / box.area();
  }
  f += std::max(0.0, 1.0 - covered) * protos.background;
  return f;
}

int sample_count(Rng& rng, const std::array<double, 4>& weights) {
  std::discrete_distribution<int> dist(weights.begin(), weights.end());
  return dist(rng) + 1;
}

}  // namespace

SynthPrototypes make_prototypes(const SynthConfig& cfg) {
  Rng rng(splitmix64(cfg.prototype_seed ^ 0x5eedc0deULL));
  const double norm = cfg.prototype_separation / std::sqrt(2.0);
  SynthPrototypes p;
  p.body.resize(cfg.num_classes, cfg.feature_dim);
  p.part_offset.resize(cfg.num_classes, cfg.feature_dim);
  for (int c = 0; c < cfg.num_classes; ++c) {
    p.body.row(c) = random_direction(rng, cfg.feature_dim, norm).transpose();
  }
  for (int c = 0; c < cfg.num_classes; ++c) {
    p.part_offset.row(c) =
        random_direction(rng, cfg.feature_dim, cfg.prototype_separation).transpose();
  }
  p.background = random_direction(rng, cfg.feature_dim, norm);
  return p;
}

SynthResult generate_with_info(const SynthConfig& cfg) {
  cfg.validate();
  const SynthPrototypes protos = make_prototypes(cfg);
  SynthResult out;
  out.dataset.num_classes = cfg.num_classes;
  out.dataset.feature_dim = cfg.feature_dim;

  for (int i = 0; i < cfg.num_images; ++i) {
    Rng rng(splitmix64(cfg.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i)));

    std::vector<int> classes(cfg.num_classes);
    std::iota(classes.begin(), classes.end(), 1);
    std::shuffle(classes.begin(), classes.end(), rng);
    const int num_active = std::uniform_int_distribution<int>(1, cfg.max_active_classes)(rng);
    classes.resize(num_active);
    std::sort(classes.begin(), classes.end());

    std::vector<Object> objects;
    for (int c : classes) {
      const int count = sample_count(rng, cfg.instance_weights);
      for (int n = 0; n < count; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
          const double w = uniform(rng, cfg.min_object_size, cfg.max_object_size);
          const double h = uniform(rng, cfg.min_object_size, cfg.max_object_size);
          if (w > cfg.width || h > cfg.height) continue;
          const double x = uniform(rng, 0.0, cfg.width - w);
          const double y = uniform(rng, 0.0, cfg.height - h);
          const BoxF candidate{x, y, x + w, y + h};
          const BoxF padded{x - cfg.object_gap, y - cfg.object_gap, x + w + cfg.object_gap,
                            y + h + cfg.object_gap};
          const bool clash = std::any_of(objects.begin(), objects.end(), [&](const Object& o) {
            return intersection_area(padded, o.box) > 0.0;
          });
          if (clash) continue;
          objects.push_back({candidate, random_part(rng, candidate, cfg.part_fraction), c});
          placed = true;
        }
        if (!placed) {
          throw ValidationError("synth: canvas too small for requested instances in image " +
                                std::to_string(i));
        }
      }
    }

    std::vector<BoxF> boxes;
    std::vector<ProposalOrigin> origins;
    for (std::size_t o = 0; o < objects.size(); ++o) {
      for (int p = 0; p < cfg.proposals_per_object; ++p) {
        const double stratum = kIouStrata[p % kIouStrata.size()];
        boxes.push_back(jittered_proposal(rng, objects[o], stratum, cfg.width, cfg.height));
        origins.push_back({ProposalOrigin::Kind::kJittered, static_cast<int>(o), stratum});
      }
      boxes.push_back(objects[o].part);
      origins.push_back({ProposalOrigin::Kind::kPart, static_cast<int>(o), 0.0});
    }
    const double max_bg = std::max(24.0, 0.5 * std::min(cfg.width, cfg.height));
    for (int b = 0; b < cfg.background_proposals; ++b) {
      const double w = uniform(rng, 16.0, max_bg);
      const double h = uniform(rng, 16.0, max_bg);
      const double x = uniform(rng, 0.0, std::max(0.0, cfg.width - w));
      const double y = uniform(rng, 0.0, std::max(0.0, cfg.height - h));
      boxes.push_back(clip({x, y, x + w, y + h}, cfg.width, cfg.height));
      origins.push_back({ProposalOrigin::Kind::kBackground, -1, 0.0});
    }

    // Proposal order carries no information.
    std::vector<int> perm(boxes.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Sample sample;
    ProposalSet& ps = sample.proposals;
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d", i);
    ps.image_id = name;
    ps.width = cfg.width;
    ps.height = cfg.height;
    ps.image_labels.assign(cfg.num_classes, 0);
    for (int c : classes) ps.image_labels[c - 1] = 1;
    ps.features.resize(static_cast<Eigen::Index>(boxes.size()), cfg.feature_dim);

    SynthImageInfo info;
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const BoxF& b = boxes[perm[k]];
      ps.boxes.push_back(b);
      info.origins.push_back(origins[perm[k]]);
      Vector f = region_feature(b, objects, protos, cfg.part_confound_strength);
      if (cfg.noise_sigma > 0.0) {
        for (int d = 0; d < cfg.feature_dim; ++d) f[d] += noise(rng);
      }
      ps.features.row(static_cast<Eigen::Index>(k)) = f.transpose();
    }
    for (const auto& o : objects) {
      sample.gt.push_back({o.box, o.class_id});
      info.parts.push_back(o.part);
    }
    sample.has_gt = true;
    out.dataset.images.push_back(std::move(sample));
    out.info.push_back(std::move(info));
  }
  return out;
}

Dataset generate(const SynthConfig& cfg) { return generate_with_info(cfg).dataset; }

Matrix oracle_scores(const ProposalSet& ps, const GroundTruth& gt) {
  const int num_c = ps.num_classes();
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(ps.size()), num_c + 1);
  for (std::size_t j = 0; j < ps.size(); ++j) {
    double best = 0.0;
    for (const auto& g : gt) {
      if (g.class_id < 1 || g.class_id > num_c) continue;
      const double v = iou(ps.boxes[j], g.box);
      s(j, g.class_id) = std::max(s(j, g.class_id), v);
      best = std::max(best, v);
    }
    s(j, 0) = 1.0 - best;
  }
  return s;
}

std::vector<Matrix> oracle_scores(const Dataset& dataset) {
  std::vector<Matrix> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.images) out.push_back(oracle_scores(s.proposals, s.gt));
  return out;
}

void apply_oracle_scores(Dataset& dataset) {
  for (auto& s : dataset.images) s.proposals.scores = oracle_scores(s.proposals, s.gt);
}

}  // namespace oim
